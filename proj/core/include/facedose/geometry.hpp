#pragma once

#include "facedose/landmarks.hpp"
#include "facedose/region_table.hpp"

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace facedose {

/// x -> scale * R(rotation) * x + translation.
struct SimilarityTransform
{
    double rotation = 0.0; ///< radians
    double scale = 1.0;
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();

    Point2 apply(const Point2& p) const;
    std::vector<Point2> apply(std::span<const Point2> points) const;
    SimilarityTransform inverse() const;
    /// (this o first)(x) == this->apply(first.apply(x))
    SimilarityTransform compose(const SimilarityTransform& first) const;

    static SimilarityTransform identity() { return {}; }
};

/**
 * Least-squares similarity transform taking `src` onto `dst`.
 *
 * Closed-form 2-D Umeyama solution: with both sets centred, the rotation
 * angle is atan2 of the summed cross and dot products, and the scale is the
 * magnitude of that pair over the source variance. The residual is the
 * global minimum over all similarity transforms.
 *
 * Throws Error(shape_mismatch) for lists of different or < 2 length and
 * Error(degenerate_configuration) when either set collapses to one point.
 */
SimilarityTransform fit_similarity(std::span<const Point2> src, std::span<const Point2> dst);

/// A landmark configuration in the canonical 256x256 frame, eye segment
/// horizontal, together with its inter-pupillary distance.
struct CanonicalLandmarks
{
    std::vector<Point2> points;
    double ipd = 0.0;

    LandmarkSet to_landmark_set() const;
};

struct Anchors
{
    Point2 eye_left, eye_right, mouth_center;
};

Anchors anchors_of(std::span<const Point2> points, const RegionIndexTable& table);

/// Maps a face into the canonical frame: a similarity fit of the eye centers
/// and mouth center onto the template anchors, followed by a rotation about
/// the eye midpoint that levels the eye segment exactly. Idempotent.
CanonicalLandmarks align(const LandmarkSet& landmarks, const RegionIndexTable& table,
                         const AnchorTemplate& anchors = kCanonicalAnchors);

/// Wraps points that are already canonical without moving them (ipd from
/// the current eye centers).
CanonicalLandmarks as_canonical(std::vector<Point2> points, const RegionIndexTable& table);

/// RMS residual between two configurations after removing their centroids
/// and the optimal 2-D rotation. Scale is left untouched.
double procrustes_distance(std::span<const Point2> x, std::span<const Point2> y);

/// 1 - min(L/R, R/L) for positive measurements.
double symmetry_ratio(double left, double right);

/// Metric order matches the report rows, with the aggregate last.
enum class Metric : int { eyebrows_asym = 0, eyes_asym, furrow, outer_eyebrow_nose, mouth_angle, total_asym };
inline constexpr std::size_t kMetricCount = 6;

std::string_view metric_key(Metric m) noexcept;   ///< "eyebrows_asym", ...
std::string_view metric_label(Metric m) noexcept; ///< "Eyebrows Asym.", ...
/// Metrics computed from inter-landmark distances (everything except the mouth angle).
bool is_distance_metric(Metric m) noexcept;

struct MetricVector
{
    std::array<double, kMetricCount> values{};

    double operator[](Metric m) const { return values[static_cast<int>(m)]; }
    double& operator[](Metric m) { return values[static_cast<int>(m)]; }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }

    friend bool operator==(const MetricVector&, const MetricVector&) = default;
};

/**
 * The six asymmetry metrics of an aligned face.
 *
 * Coordinates are divided by the IPD first. The eyebrow, eye and furrow
 * entries are Procrustes distances between the left structure and the
 * mirrored right structure (reflected about the vertical line through the
 * eye midpoint, reordered by the correspondence). total_asym is their
 * mean. outer_eyebrow_nose is the symmetry ratio of the two outer-brow to
 * nose-tip distances. mouth_angle is |theta - 90| in degrees, theta being
 * the angle between the mouth-corner segment and the vertical midline.
 */
MetricVector compute_metrics(const CanonicalLandmarks& face, const RegionIndexTable& table);

/// Procrustes distance between the same landmark subset of two canonical
/// faces, each normalized by its own IPD. Used to measure how far a region
/// sits from a reference (e.g. the symmetric target).
double region_deviation(const CanonicalLandmarks& face, const CanonicalLandmarks& reference,
                        std::span<const int> indices);

/// Reflects the points about the vertical line x = axis_x.
std::vector<Point2> reflect_x(std::span<const Point2> points, double axis_x);

} // namespace facedose
