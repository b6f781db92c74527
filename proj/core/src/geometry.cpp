#include "facedose/geometry.hpp"

#include "facedose/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace facedose {

namespace {

Eigen::Matrix2d rotation_matrix(double angle)
{
    const double c = std::cos(angle), s = std::sin(angle);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
}

constexpr std::string_view kMetricKeys[kMetricCount] = {"eyebrows_asym",      "eyes_asym",   "furrow",
                                                        "outer_eyebrow_nose", "mouth_angle", "total_asym"};
constexpr std::string_view kMetricLabels[kMetricCount] = {"Eyebrows Asym.",    "Eyes Asym.",  "Furrow",
                                                          "Outer Eyebr.-Nose", "Mouth Angle", "Total Asym."};

std::vector<Point2> gather(std::span<const Point2> points, std::span<const int> indices, double scale)
{
    std::vector<Point2> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(points[i] * scale);
    return out;
}

} // namespace

Point2 SimilarityTransform::apply(const Point2& p) const
{
    return scale * (rotation_matrix(rotation) * p) + translation;
}

std::vector<Point2> SimilarityTransform::apply(std::span<const Point2> points) const
{
    const Eigen::Matrix2d sr = scale * rotation_matrix(rotation);
    std::vector<Point2> out;
    out.reserve(points.size());
    for (const Point2& p : points) out.push_back(sr * p + translation);
    return out;
}

SimilarityTransform SimilarityTransform::inverse() const
{
    SimilarityTransform inv;
    inv.rotation = -rotation;
    inv.scale = 1.0 / scale;
    inv.translation = -(inv.scale * (rotation_matrix(-rotation) * translation));
    return inv;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& first) const
{
    SimilarityTransform out;
    out.rotation = rotation + first.rotation;
    out.scale = scale * first.scale;
    out.translation = scale * (rotation_matrix(rotation) * first.translation) + translation;
    return out;
}

SimilarityTransform fit_similarity(std::span<const Point2> src, std::span<const Point2> dst)
{
    if (src.size() != dst.size()) {
        throw Error(Errc::shape_mismatch, "anchor lists differ in length");
    }
    if (src.size() < 2) {
        throw Error(Errc::shape_mismatch, "at least two anchor points are required");
    }
    const double n = static_cast<double>(src.size());
    Point2 mu_s = Point2::Zero(), mu_d = Point2::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        mu_s += src[i];
        mu_d += dst[i];
    }
    mu_s /= n;
    mu_d /= n;

    double dot = 0.0, cross = 0.0, var_s = 0.0, var_d = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Point2 s = src[i] - mu_s;
        const Point2 d = dst[i] - mu_d;
        dot += s.dot(d);
        cross += s.x() * d.y() - s.y() * d.x();
        var_s += s.squaredNorm();
        var_d += d.squaredNorm();
    }
    const double spread_s = var_s / n, spread_d = var_d / n;
    const double ref = std::max({1.0, mu_s.squaredNorm(), mu_d.squaredNorm()});
    if (spread_s <= 1e-24 * ref || spread_d <= 1e-24 * ref) {
        throw Error(Errc::degenerate_configuration, "anchor points are coincident");
    }

    SimilarityTransform t;
    t.rotation = std::atan2(cross, dot);
    t.scale = std::hypot(dot, cross) / var_s;
    t.translation = mu_d - t.scale * (rotation_matrix(t.rotation) * mu_s);
    return t;
}

LandmarkSet CanonicalLandmarks::to_landmark_set() const
{
    return LandmarkSet(points, FrameSize{static_cast<int>(kCanonicalSize), static_cast<int>(kCanonicalSize)});
}

Anchors anchors_of(std::span<const Point2> points, const RegionIndexTable& table)
{
    return {centroid(points, table.eye_left), centroid(points, table.eye_right),
            centroid(points, table.mouth_center)};
}

CanonicalLandmarks align(const LandmarkSet& landmarks, const RegionIndexTable& table,
                         const AnchorTemplate& tmpl)
{
    const Anchors a = anchors_of(landmarks.points(), table);
    const std::array<Point2, 3> src{a.eye_left, a.eye_right, a.mouth_center};
    const std::array<Point2, 3> dst{tmpl.eye_left, tmpl.eye_right, tmpl.mouth_center};
    const SimilarityTransform fit = fit_similarity(src, dst);

    // Level the eye segment by rotating about the (transformed) eye midpoint.
    const Point2 el = fit.apply(a.eye_left);
    const Point2 er = fit.apply(a.eye_right);
    const Point2 d = er - el;
    if (d.norm() <= 1e-12 * tmpl.ipd()) {
        throw Error(Errc::degenerate_configuration, "eye centers coincide (zero IPD)");
    }
    const double tilt = std::atan2(d.y(), d.x());
    const Point2 pivot = 0.5 * (el + er);
    SimilarityTransform level;
    level.rotation = -tilt;
    level.translation = pivot - rotation_matrix(-tilt) * pivot;

    CanonicalLandmarks out;
    out.points = level.compose(fit).apply(landmarks.points());
    // Snap the eye-center y coordinates onto each other; removes the last ulp
    // of tilt left over from composing the two rotations.
    const Anchors aligned = anchors_of(out.points, table);
    const double residual_tilt = std::atan2(aligned.eye_right.y() - aligned.eye_left.y(),
                                            aligned.eye_right.x() - aligned.eye_left.x());
    if (residual_tilt != 0.0) {
        const Point2 c = 0.5 * (aligned.eye_left + aligned.eye_right);
        const Eigen::Matrix2d r = rotation_matrix(-residual_tilt);
        for (Point2& p : out.points) p = r * (p - c) + c;
    }
    const Anchors final_anchors = anchors_of(out.points, table);
    out.ipd = (final_anchors.eye_right - final_anchors.eye_left).norm();
    if (!(out.ipd > 0.0)) {
        throw Error(Errc::degenerate_configuration, "zero inter-pupillary distance");
    }
    return out;
}

CanonicalLandmarks as_canonical(std::vector<Point2> points, const RegionIndexTable& table)
{
    CanonicalLandmarks out;
    const Anchors a = anchors_of(points, table);
    out.points = std::move(points);
    out.ipd = (a.eye_right - a.eye_left).norm();
    if (!(out.ipd > 0.0)) {
        throw Error(Errc::degenerate_configuration, "zero inter-pupillary distance");
    }
    return out;
}

double procrustes_distance(std::span<const Point2> x, std::span<const Point2> y)
{
    if (x.size() != y.size()) {
        throw Error(Errc::shape_mismatch, "configurations differ in point count");
    }
    if (x.size() < 2) {
        throw Error(Errc::shape_mismatch, "at least two points are required");
    }
    const double n = static_cast<double>(x.size());
    Point2 cx = Point2::Zero(), cy = Point2::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
        cx += x[i];
        cy += y[i];
    }
    cx /= n;
    cy /= n;

    // Rotation of y onto x maximizing sum x . R y.
    double dot = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Point2 a = x[i] - cx;
        const Point2 b = y[i] - cy;
        dot += a.dot(b);
        cross += b.x() * a.y() - b.y() * a.x();
    }
    const Eigen::Matrix2d r = rotation_matrix(std::atan2(cross, dot));
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sse += ((x[i] - cx) - r * (y[i] - cy)).squaredNorm();
    }
    return std::sqrt(sse / n);
}

double symmetry_ratio(double left, double right)
{
    if (!(left > 0.0) || !(right > 0.0) || !std::isfinite(left) || !std::isfinite(right)) {
        throw Error(Errc::invalid_measurement, "symmetry ratio needs positive finite measurements");
    }
    return 1.0 - std::min(left / right, right / left);
}

std::string_view metric_key(Metric m) noexcept
{
    return kMetricKeys[static_cast<int>(m)];
}

std::string_view metric_label(Metric m) noexcept
{
    return kMetricLabels[static_cast<int>(m)];
}

bool is_distance_metric(Metric m) noexcept
{
    return m != Metric::mouth_angle;
}

std::vector<Point2> reflect_x(std::span<const Point2> points, double axis_x)
{
    std::vector<Point2> out;
    out.reserve(points.size());
    for (const Point2& p : points) out.emplace_back(2.0 * axis_x - p.x(), p.y());
    return out;
}

MetricVector compute_metrics(const CanonicalLandmarks& face, const RegionIndexTable& table)
{
    if (face.points.size() != kLandmarkCount) {
        throw Error(Errc::shape_mismatch, "canonical face must carry 468 landmarks");
    }
    if (!(face.ipd > 0.0)) {
        throw Error(Errc::degenerate_configuration, "zero inter-pupillary distance");
    }
    const double inv = 1.0 / face.ipd;
    const Anchors a = anchors_of(face.points, table);
    const double axis = 0.5 * (a.eye_left.x() + a.eye_right.x()) * inv;

    auto pair_distance = [&](const std::vector<int>& left, const std::vector<int>& right) {
        const std::vector<Point2> l = gather(face.points, left, inv);
        const std::vector<Point2> r = reflect_x(gather(face.points, right, inv), axis);
        return procrustes_distance(l, r);
    };

    MetricVector m;
    m[Metric::eyebrows_asym] = pair_distance(table.brow_left, table.brow_right);
    m[Metric::eyes_asym] = pair_distance(table.eye_left, table.eye_right);
    m[Metric::furrow] = pair_distance(table.furrow_left, table.furrow_right);

    const Point2 nose = face.points[table.nose_tip] * inv;
    const double dl = (face.points[table.outer_brow_left] * inv - nose).norm();
    const double dr = (face.points[table.outer_brow_right] * inv - nose).norm();
    m[Metric::outer_eyebrow_nose] = symmetry_ratio(dl, dr);

    const Point2 mouth = face.points[table.mouth_corner_right] - face.points[table.mouth_corner_left];
    m[Metric::mouth_angle] = std::atan2(std::abs(mouth.y()), std::abs(mouth.x())) * 180.0 / std::numbers::pi;

    m[Metric::total_asym] = (m[Metric::eyebrows_asym] + m[Metric::eyes_asym] + m[Metric::furrow]) / 3.0;
    return m;
}

double region_deviation(const CanonicalLandmarks& face, const CanonicalLandmarks& reference,
                        std::span<const int> indices)
{
    return procrustes_distance(gather(face.points, indices, 1.0 / face.ipd),
                               gather(reference.points, indices, 1.0 / reference.ipd));
}

} // namespace facedose
