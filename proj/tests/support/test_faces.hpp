#pragma once
// Face and latent fixtures shared by the unit and acceptance tests.

#include <facedose/axes.hpp>
#include <facedose/face_topology.hpp>
#include <facedose/faceworld.hpp>
#include <facedose/geometry.hpp>
#include <facedose/region_table.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace facedose::testing {

inline const RegionIndexTable& table()
{
    return RegionIndexTable::standard();
}

inline std::vector<Point2> base_points()
{
    return synthetic_base_face(table());
}

inline LandmarkSet as_set(std::vector<Point2> pts)
{
    return LandmarkSet(std::move(pts), {256, 256});
}

/// Base face with every point jittered by up to `amp` pixels.
inline std::vector<Point2> jittered_face(std::mt19937_64& rng, double amp = 3.0)
{
    std::uniform_real_distribution<double> d(-amp, amp);
    std::vector<Point2> pts = base_points();
    for (Point2& p : pts) p += Point2(d(rng), d(rng));
    return pts;
}

/// Mirror-symmetric about x = 128: left points jittered, right points copied
/// by reflection, midline points kept on the axis.
inline std::vector<Point2> symmetric_face(std::mt19937_64& rng, double amp = 3.0)
{
    std::uniform_real_distribution<double> d(-amp, amp);
    std::vector<Point2> pts = base_points();
    const RegionIndexTable& t = table();
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        if (t.side_of(i) == Side::left) pts[i] += Point2(d(rng), d(rng));
        if (t.side_of(i) == Side::midline) pts[i].y() += d(rng);
    }
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        if (t.side_of(i) == Side::right) {
            const Point2& q = pts[t.mirror[i]];
            pts[i] = Point2(256.0 - q.x(), q.y());
        }
    }
    return pts;
}

inline Eigen::Matrix2d rot(double theta)
{
    Eigen::Matrix2d r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

inline std::vector<Point2> transformed(const std::vector<Point2>& pts, double theta, double scale, Point2 shift,
                                       Point2 about = Point2(128, 128))
{
    std::vector<Point2> out;
    out.reserve(pts.size());
    const Eigen::Matrix2d r = rot(theta);
    for (const Point2& p : pts) out.push_back(scale * (r * (p - about)) + about + shift);
    return out;
}

inline LatentCode random_code(LatentShape shape, std::mt19937_64& rng, double sd = 1.0)
{
    std::normal_distribution<double> n(0.0, sd);
    LatentCode w(shape);
    for (int i = 0; i < shape.size(); ++i) w.flat()[i] = n(rng);
    return w;
}

inline AxisBasis random_basis(LatentShape shape, std::mt19937_64& rng)
{
    AxisBasis b;
    for (LatentCode& v : b.axes) v = random_code(shape, rng);
    return b;
}

inline AlphaVector random_alpha(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> d(lo, hi);
    AlphaVector a;
    for (double& v : a.values) v = d(rng);
    return a;
}

inline double max_abs_diff(const MetricVector& a, const MetricVector& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < kMetricCount; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace facedose::testing
