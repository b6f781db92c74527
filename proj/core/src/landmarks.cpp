#include "facedose/landmarks.hpp"

#include "facedose/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace facedose {

LandmarkSet::LandmarkSet(std::vector<Point2> points, FrameSize frame)
    : points_(std::move(points)), frame_(frame)
{
    if (points_.size() != kLandmarkCount) {
        throw Error(Errc::shape_mismatch,
                    "expected " + std::to_string(kLandmarkCount) + " landmarks, got " +
                        std::to_string(points_.size()),
                    "points");
    }
    if (frame_.width <= 0 || frame_.height <= 0) {
        throw Error(Errc::invalid_data, "frame size must be positive", "frame");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!std::isfinite(points_[i].x()) || !std::isfinite(points_[i].y())) {
            throw Error(Errc::invalid_data, "non-finite landmark coordinate",
                        "points[" + std::to_string(i) + "]");
        }
    }
}

double max_point_distance(std::span<const Point2> a, std::span<const Point2> b)
{
    if (a.size() != b.size()) {
        throw Error(Errc::shape_mismatch, "point lists differ in length");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, (a[i] - b[i]).norm());
    }
    return worst;
}

} // namespace facedose
