#include "test_faces.hpp"

#include <facedose/error.hpp>
#include <facedose/geometry.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace facedose;
using namespace facedose::testing;

namespace {

constexpr double kPi = std::numbers::pi;

double fit_cost(std::span<const Point2> src, std::span<const Point2> dst, double th, double s, double tx, double ty)
{
    const Eigen::Matrix2d r = rot(th);
    double c = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) c += (s * (r * src[i]) + Point2(tx, ty) - dst[i]).squaredNorm();
    return c;
}

// Coarse-to-fine exhaustive search over (rotation, scale, tx, ty); each round
// scans an 11^4 grid around the incumbent and then halves the window.
std::array<double, 4> grid_search_fit(std::span<const Point2> src, std::span<const Point2> dst)
{
    std::array<double, 4> best{0.0, 1.0, 0.0, 0.0};
    std::array<double, 4> half{kPi, 1.0, 200.0, 200.0};
    double best_cost = fit_cost(src, dst, best[0], best[1], best[2], best[3]);
    for (int round = 0; round < 40; ++round) {
        const std::array<double, 4> centre = best;
        for (int a = -5; a <= 5; ++a)
            for (int b = -5; b <= 5; ++b)
                for (int c = -5; c <= 5; ++c)
                    for (int d = -5; d <= 5; ++d) {
                        const double th = centre[0] + half[0] * a / 5.0;
                        const double s = centre[1] + half[1] * b / 5.0;
                        const double tx = centre[2] + half[2] * c / 5.0;
                        const double ty = centre[3] + half[3] * d / 5.0;
                        if (s <= 0) continue;
                        const double cost = fit_cost(src, dst, th, s, tx, ty);
                        if (cost < best_cost) {
                            best_cost = cost;
                            best = {th, s, tx, ty};
                        }
                    }
        for (double& h : half) h *= 0.6;
    }
    return best;
}

// RMS residual minimized over the rotation angle by a plain sweep.
double procrustes_sweep(std::vector<Point2> x, std::vector<Point2> y, double step)
{
    auto centre = [](std::vector<Point2>& p) {
        Point2 c = Point2::Zero();
        for (const Point2& q : p) c += q;
        c /= static_cast<double>(p.size());
        for (Point2& q : p) q -= c;
    };
    centre(x);
    centre(y);
    double best = INFINITY;
    for (double th = 0.0; th < 2 * kPi; th += step) {
        const double c = std::cos(th), s = std::sin(th);
        double sum = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const Point2 rx(c * x[i].x() - s * x[i].y(), s * x[i].x() + c * x[i].y());
            sum += (rx - y[i]).squaredNorm();
        }
        best = std::min(best, sum);
    }
    return std::sqrt(best / static_cast<double>(x.size()));
}

} // namespace

TEST(FitSimilarity, TemplateOntoItselfIsIdentity)
{
    const std::vector<Point2> t{{88, 104}, {168, 104}, {128, 180}};
    const SimilarityTransform f = fit_similarity(t, t);
    EXPECT_NEAR(f.rotation, 0.0, 1e-12);
    EXPECT_NEAR(f.scale, 1.0, 1e-12);
    EXPECT_NEAR(f.translation.norm(), 0.0, 1e-9);
}

TEST(FitSimilarity, UndoesRotationAndShift)
{
    const std::vector<Point2> t{{88, 104}, {168, 104}, {128, 180}};
    const double th = 30.0 * kPi / 180.0;
    std::vector<Point2> moved;
    for (const Point2& p : t) moved.push_back(rot(th) * p + Point2(5, -3));
    const SimilarityTransform f = fit_similarity(moved, t);
    EXPECT_NEAR(f.rotation, -th, 1e-12);
    EXPECT_NEAR(f.scale, 1.0, 1e-12);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_LT((f.apply(moved[i]) - t[i]).norm(), 1e-9);
}

TEST(FitSimilarity, NoisyAnchorsMatchGridSearch)
{
    const std::vector<Point2> dst{{88, 104}, {168, 104}, {128, 180}};
    const std::vector<Point2> src{{101.3, 93.2}, {172.9, 121.7}, {115.4, 181.1}};
    const SimilarityTransform f = fit_similarity(src, dst);
    const auto g = grid_search_fit(src, dst);
    EXPECT_NEAR(f.rotation, g[0], 1e-3);
    EXPECT_NEAR(f.scale, g[1], 1e-3);
    EXPECT_NEAR(f.translation.x(), g[2], 1e-3);
    EXPECT_NEAR(f.translation.y(), g[3], 1e-3);
}

TEST(FitSimilarity, CoincidentPointsAreDegenerate)
{
    const std::vector<Point2> same{{3, 4}, {3, 4}, {3, 4}};
    const std::vector<Point2> t{{88, 104}, {168, 104}, {128, 180}};
    try {
        (void)fit_similarity(same, t);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::degenerate_configuration);
    }
}

TEST(SimilarityTransform, InverseRoundTrip)
{
    const SimilarityTransform f{0.7, 1.9, Eigen::Vector2d(12.5, -40.0)};
    const Point2 p(33.3, 71.1);
    EXPECT_LT((f.inverse().apply(f.apply(p)) - p).norm(), 1e-9);
}

TEST(Align, CanonicalInputIsUnchanged)
{
    const std::vector<Point2> base = base_points();
    const CanonicalLandmarks c = align(as_set(base), table());
    EXPECT_LT(max_point_distance(c.points, base), 1e-6);
}

TEST(Align, LevelsRotatedInput)
{
    const auto moved = transformed(base_points(), 10.0 * kPi / 180.0, 1.0, Point2::Zero());
    const CanonicalLandmarks c = align(as_set(moved), table());
    const Anchors a = anchors_of(c.points, table());
    EXPECT_LT(std::abs(std::atan2(a.eye_right.y() - a.eye_left.y(), a.eye_right.x() - a.eye_left.x())), 1e-9);
    EXPECT_GT(c.ipd, 0.0);
}

TEST(Align, Idempotent)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto face = transformed(jittered_face(rng), 0.2 * trial - 2.0, 0.8 + 0.05 * trial, Point2(7, -4));
        const CanonicalLandmarks once = align(as_set(face), table());
        const CanonicalLandmarks twice = align(once.to_landmark_set(), table());
        EXPECT_LT(max_point_distance(once.points, twice.points), 1e-6);
    }
}

TEST(Procrustes, IdenticalIsZero)
{
    const std::vector<Point2> x{{0, 0}, {1, 0}, {0, 1}, {2, 3}};
    EXPECT_EQ(procrustes_distance(x, x), 0.0);
}

TEST(Procrustes, RotatedAndTranslatedIsZero)
{
    const std::vector<Point2> x{{0, 0}, {1, 0}, {0, 1}, {2, 3}};
    std::vector<Point2> y;
    for (const Point2& p : x) y.push_back(rot(kPi / 4) * p + Point2(3, -1));
    EXPECT_NEAR(procrustes_distance(x, y), 0.0, 1e-12);
}

TEST(Procrustes, MatchesRotationSweep)
{
    const std::vector<Point2> x{{0, 0}, {1, 0}, {0, 1}};
    const std::vector<Point2> y{{0, 0}, {1, 0}, {0, 2}};
    EXPECT_NEAR(procrustes_distance(x, y), procrustes_sweep(x, y, 1e-6), 1e-5);
}

TEST(Procrustes, LengthMismatch)
{
    const std::vector<Point2> x{{0, 0}, {1, 0}, {0, 1}};
    const std::vector<Point2> y{{0, 0}, {1, 0}};
    try {
        (void)procrustes_distance(x, y);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::shape_mismatch);
    }
}

TEST(SymmetryRatio, Examples)
{
    EXPECT_EQ(symmetry_ratio(3.2, 3.2), 0.0);
    EXPECT_DOUBLE_EQ(symmetry_ratio(1, 2), 0.5);
    EXPECT_DOUBLE_EQ(symmetry_ratio(2, 1), 0.5);
    EXPECT_THROW((void)symmetry_ratio(0.0, 1.0), Error);
    EXPECT_THROW((void)symmetry_ratio(1.0, -2.0), Error);
}

TEST(Metrics, SymmetricFaceIsZero)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const MetricVector m = compute_metrics(align(as_set(symmetric_face(rng)), table()), table());
        for (std::size_t i = 0; i < kMetricCount; ++i) EXPECT_LT(m[i], 1e-9) << metric_key(Metric(i));
    }
}

TEST(Metrics, RaisedMouthCornerStaysLocal)
{
    std::vector<Point2> pts = base_points();
    const CanonicalLandmarks ref = as_canonical(pts, table());
    pts[table().mouth_corner_left].y() -= 0.1 * ref.ipd;
    const MetricVector m = compute_metrics(as_canonical(pts, table()), table());
    EXPECT_GT(m[Metric::mouth_angle], 1.0);
    EXPECT_LT(m[Metric::eyebrows_asym], 1e-9);
    EXPECT_LT(m[Metric::eyes_asym], 1e-9);
    EXPECT_LT(m[Metric::outer_eyebrow_nose], 1e-9);
}

TEST(Metrics, RecomputedFromComponents)
{
    std::mt19937_64 rng(5);
    const RegionIndexTable& t = table();
    const CanonicalLandmarks c = align(as_set(jittered_face(rng)), t);
    const MetricVector m = compute_metrics(c, t);

    // Independent recomputation: IPD-normalize, reflect the right structure
    // about the eye midpoint and compare against the left structure.
    const Anchors a = anchors_of(c.points, t);
    const double axis = 0.5 * (a.eye_left.x() + a.eye_right.x());
    auto region = [&](const std::vector<int>& left, const std::vector<int>& right) {
        std::vector<Point2> l, r;
        for (std::size_t i = 0; i < left.size(); ++i) {
            l.push_back(c.points[left[i]] / c.ipd);
            const Point2& q = c.points[right[i]];
            r.push_back(Point2(2 * axis - q.x(), q.y()) / c.ipd);
        }
        return procrustes_distance(l, r);
    };
    const double brows = region(t.brow_left, t.brow_right);
    const double eyes = region(t.eye_left, t.eye_right);
    const double furrow = region(t.furrow_left, t.furrow_right);
    EXPECT_NEAR(m[Metric::eyebrows_asym], brows, 1e-12);
    EXPECT_NEAR(m[Metric::eyes_asym], eyes, 1e-12);
    EXPECT_NEAR(m[Metric::furrow], furrow, 1e-12);
    EXPECT_EQ(m[Metric::total_asym], (m[Metric::eyebrows_asym] + m[Metric::eyes_asym] + m[Metric::furrow]) / 3.0);

    const Point2 nose = c.points[t.nose_tip];
    const double dl = (c.points[t.outer_brow_left] - nose).norm();
    const double dr = (c.points[t.outer_brow_right] - nose).norm();
    EXPECT_NEAR(m[Metric::outer_eyebrow_nose], 1.0 - std::min(dl / dr, dr / dl), 1e-12);

    const Point2 seg = c.points[t.mouth_corner_right] - c.points[t.mouth_corner_left];
    const double theta = std::acos(std::abs(seg.y()) / seg.norm()) * 180.0 / kPi;
    EXPECT_NEAR(m[Metric::mouth_angle], std::abs(theta - 90.0), 1e-9);
}

TEST(Metrics, ScaleInvariant)
{
    std::mt19937_64 rng(8);
    const auto face = jittered_face(rng);
    const MetricVector m0 = compute_metrics(align(as_set(face), table()), table());
    for (double s : {0.5, 0.77, 1.3, 2.0}) {
        std::vector<Point2> scaled;
        for (const Point2& p : face) scaled.push_back(p * s);
        const MetricVector m = compute_metrics(align(LandmarkSet(scaled, {600, 600}), table()), table());
        EXPECT_LT(max_abs_diff(m0, m), 1e-9) << "scale " << s;
    }
}

TEST(Metrics, KeysAndDistanceFamily)
{
    EXPECT_EQ(metric_key(Metric::eyebrows_asym), "eyebrows_asym");
    EXPECT_EQ(metric_key(Metric::total_asym), "total_asym");
    EXPECT_FALSE(is_distance_metric(Metric::mouth_angle));
    EXPECT_TRUE(is_distance_metric(Metric::furrow));
}

TEST(LandmarkSetTest, RejectsWrongCount)
{
    std::vector<Point2> pts = base_points();
    pts.pop_back();
    EXPECT_THROW(LandmarkSet(pts, {256, 256}), Error);
}

TEST(RegionTable, StandardIsValidInvolution)
{
    const RegionIndexTable& t = table();
    EXPECT_NO_THROW(t.validate());
    ASSERT_EQ(t.mirror.size(), kLandmarkCount);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) EXPECT_EQ(t.mirror[t.mirror[i]], static_cast<int>(i));
    const std::vector<int> furrow{202, 212, 216, 206, 203, 129, 209, 126};
    EXPECT_EQ(t.furrow_left, furrow);
}
