#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace facedose {

using Point2 = Eigen::Vector2d;

/// Number of points in the face-mesh topology every module works with.
inline constexpr std::size_t kLandmarkCount = 468;

/// Side length of the square canonical frame landmarks are aligned into.
inline constexpr double kCanonicalSize = 256.0;

struct FrameSize
{
    int width = 0;
    int height = 0;

    friend bool operator==(const FrameSize&, const FrameSize&) = default;
};

/// 468 face-mesh points in pixel coordinates of some frame.
///
/// Construction validates the invariants (exact count, finite coordinates,
/// positive frame), so a LandmarkSet that exists is always usable.
class LandmarkSet
{
public:
    LandmarkSet(std::vector<Point2> points, FrameSize frame);

    std::span<const Point2> points() const noexcept { return points_; }
    const Point2& operator[](std::size_t i) const { return points_[i]; }
    FrameSize frame() const noexcept { return frame_; }
    std::size_t size() const noexcept { return points_.size(); }

    friend bool operator==(const LandmarkSet& a, const LandmarkSet& b)
    {
        return a.frame_ == b.frame_ && a.points_ == b.points_;
    }

private:
    std::vector<Point2> points_;
    FrameSize frame_;
};

/// Largest per-point Euclidean distance between two equally sized point lists.
double max_point_distance(std::span<const Point2> a, std::span<const Point2> b);

} // namespace facedose
