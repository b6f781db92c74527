#include "test_faces.hpp"

#include <facedose/error.hpp>
#include <facedose/faceworld.hpp>
#include <facedose/serialization.hpp>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <gtest/gtest.h>

using namespace facedose;
using namespace facedose::testing;

namespace {

const SyntheticWorld& world()
{
    static const SyntheticWorld w = SyntheticWorld::create({});
    return w;
}

Eigen::VectorXd flatten(std::span<const Point2> pts)
{
    Eigen::VectorXd v(2 * pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        v[2 * i] = pts[i].x();
        v[2 * i + 1] = pts[i].y();
    }
    return v;
}

double objective(const SyntheticWorld& w, const LatentCode& code, const LandmarkSet& obs,
                 std::span<const double> weights, double lambda)
{
    const LandmarkSet d = w.decode(code);
    double f = 0.0;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) f += weights[i] * (d[i] - obs[i]).squaredNorm();
    return f + lambda * (code.flat() - w.mean_code().flat()).squaredNorm();
}

double region_displacement(const LandmarkSet& a, const LandmarkSet& b, const std::vector<bool>& pick)
{
    double s = 0.0;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        if (pick[i]) s += (a[i] - b[i]).squaredNorm();
    }
    return std::sqrt(s);
}

} // namespace

TEST(Decode, ZeroCodeIsBaseFace)
{
    const LandmarkSet f = world().decode(LatentCode::zeros(world().latent_shape()));
    EXPECT_TRUE(std::equal(f.points().begin(), f.points().end(), world().base_face().begin()));
}

TEST(Decode, Deterministic)
{
    std::mt19937_64 rng(1);
    const LatentCode w = random_code(world().latent_shape(), rng, 0.5);
    EXPECT_EQ(world().decode(w), world().decode(w));
}

TEST(Decode, WrongShapeIsRejected)
{
    try {
        (void)world().decode(LatentCode::zeros({2, 8}));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::shape_mismatch);
    }
}

TEST(Decode, BlockStepStaysInItsRegion)
{
    const SyntheticWorld& w = world();
    const double eps = w.config().epsilon;
    const LandmarkSet base = w.decode(LatentCode::zeros(w.latent_shape()));
    std::mt19937_64 rng(2);
    for (Region r : kAllRegions) {
        std::vector<bool> on(kLandmarkCount, false), off(kLandmarkCount, true);
        for (int i : table().roi(r)) {
            on[i] = true;
            off[i] = false;
        }
        const auto [lo, hi] = w.block(r);
        LatentCode step = LatentCode::zeros(w.latent_shape());
        std::normal_distribution<double> n(0.0, 0.5);
        for (int i = lo; i < hi; ++i) step.flat()[i] = n(rng);
        const LandmarkSet moved = w.decode(step);
        const double d_on = region_displacement(moved, base, on);
        const double d_off = region_displacement(moved, base, off);
        EXPECT_GT(d_on, 0.0);
        EXPECT_LE(d_off, 2 * eps * d_on) << region_name(r);
    }
}

TEST(Decode, LipschitzInMixingNorm)
{
    const SyntheticWorld& w = world();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(w.mixing());
    const double op_norm = svd.singularValues()[0];
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const LatentCode a = random_code(w.latent_shape(), rng, 0.3);
        const LatentCode b = random_code(w.latent_shape(), rng, 0.3);
        const double d_obs = (flatten(w.decode(a).points()) - flatten(w.decode(b).points())).norm();
        EXPECT_LE(d_obs, op_norm * (a - b).norm() * (1 + 1e-12));
    }
}

TEST(Encode, BaseFaceIsZero)
{
    const LatentCode w = world().encode(as_set(world().base_face()));
    EXPECT_LE(w.norm(), 1e-6);
}

TEST(Encode, RecoversOnManifoldCode)
{
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const LatentCode w = random_code(world().latent_shape(), rng, 0.5);
        EXPECT_LE((world().encode(world().decode(w)) - w).norm(), 1e-6);
    }
}

TEST(Encode, ProjectionMatchesNormalEquations)
{
    const SyntheticWorld& w = world();
    std::mt19937_64 rng(6);
    const LatentCode w_star = random_code(w.latent_shape(), rng, 0.4);
    const LandmarkSet clean = w.decode(w_star);
    std::vector<Point2> pts(clean.points().begin(), clean.points().end());
    std::normal_distribution<double> n(0.0, 0.5);
    for (Point2& p : pts) p += Point2(n(rng), n(rng));
    const LandmarkSet obs = as_set(pts);

    // Independent ridge solve through the stacked system [M; sqrt(l) I] w = [y - base; 0].
    const Eigen::MatrixXd& m = w.mixing();
    const double lambda = w.config().ridge_lambda;
    const int cols = static_cast<int>(m.cols());
    Eigen::MatrixXd stacked(m.rows() + cols, cols);
    stacked << m, std::sqrt(lambda) * Eigen::MatrixXd::Identity(cols, cols);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m.rows() + cols);
    rhs.head(m.rows()) = flatten(obs.points()) - flatten(w.base_face());
    const Eigen::VectorXd oracle = stacked.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd oracle_residual = m * oracle - rhs.head(m.rows());

    const Eigen::VectorXd residual = flatten(w.decode(w.encode(obs)).points()) - flatten(obs.points());
    EXPECT_LE((residual - oracle_residual).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Refine, UniformWeightsMatchEncode)
{
    std::mt19937_64 rng(7);
    const LatentCode w_star = random_code(world().latent_shape(), rng, 0.5);
    const LandmarkSet obs = world().decode(w_star);
    const std::vector<double> ones(kLandmarkCount, 1.0);
    const LatentCode r = world().refine(world().mean_code(), obs, ones);
    EXPECT_LE((r - world().encode(obs)).norm(), 1e-5);
}

TEST(Refine, UpWeightingFitsEyesAndMouthCloser)
{
    const SyntheticWorld& w = world();
    std::mt19937_64 rng(8);
    std::vector<Point2> pts(w.base_face());
    std::normal_distribution<double> n(0.0, 2.0);
    for (Point2& p : pts) p += Point2(n(rng), n(rng));
    const LandmarkSet obs = as_set(pts);

    const std::vector<double> uniform(kLandmarkCount, 1.0);
    const std::vector<double> weighted = eye_mouth_weights(table());
    const LatentCode a = w.refine(w.mean_code(), obs, uniform);
    const LatentCode b = w.refine(w.mean_code(), obs, weighted);
    std::vector<double> emphasis(kLandmarkCount, 0.0);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) emphasis[i] = weighted[i] > 1.0 ? 1.0 : 0.0;
    EXPECT_LT(objective(w, b, obs, emphasis, 0.0), objective(w, a, obs, emphasis, 0.0));
}

TEST(Refine, ObjectiveNonIncreasingPerStep)
{
    const SyntheticWorld& w = world();
    std::mt19937_64 rng(9);
    const LandmarkSet obs = w.decode(random_code(w.latent_shape(), rng, 0.5));
    const std::vector<double> weights = eye_mouth_weights(table());
    double previous = objective(w, w.mean_code(), obs, weights, w.config().ridge_lambda);
    for (int steps = 1; steps <= 30; ++steps) {
        const LatentCode r = w.refine(w.mean_code(), obs, weights, {steps, std::nullopt});
        const double f = objective(w, r, obs, weights, w.config().ridge_lambda);
        EXPECT_LE(f, previous * (1 + 1e-12) + 1e-18) << "step " << steps;
        previous = f;
    }
}

TEST(Refine, StrongRidgeGoesToMean)
{
    std::mt19937_64 rng(10);
    const LandmarkSet obs = world().decode(random_code(world().latent_shape(), rng, 0.5));
    const std::vector<double> ones(kLandmarkCount, 1.0);
    const LatentCode r = world().refine(random_code(world().latent_shape(), rng), obs, ones, {30, 1e12});
    EXPECT_LE((r - world().mean_code()).norm(), 1e-6);
}

TEST(MirrorFace, SymmetricFaceIsFixedPoint)
{
    std::mt19937_64 rng(11);
    const LandmarkSet face = as_set(symmetric_face(rng));
    for (Side s : {Side::left, Side::right}) {
        EXPECT_LE(max_point_distance(mirror_face(face, table(), s).points(), face.points()), 1e-9);
    }
}

TEST(MirrorFace, RaisedLeftBrowIsCopied)
{
    std::vector<Point2> pts = base_points();
    for (int i : table().brow_left) pts[i].y() -= 4.0;
    const LandmarkSet out = mirror_face(as_set(pts), table(), Side::left);
    for (std::size_t k = 0; k < table().brow_right.size(); ++k) {
        EXPECT_NEAR(out[table().brow_right[k]].y(), pts[table().brow_left[k]].y(), 1e-12);
    }
}

TEST(MirrorFace, Idempotent)
{
    std::mt19937_64 rng(12);
    const LandmarkSet face = as_set(jittered_face(rng));
    const LandmarkSet once = mirror_face(face, table(), Side::left);
    EXPECT_LE(max_point_distance(mirror_face(once, table(), Side::left).points(), once.points()), 1e-12);
}

TEST(SymmetricTarget, SymmetricInputIsKept)
{
    const SyntheticWorld& w = world();
    std::mt19937_64 rng(13);
    LatentCode code = random_code(w.latent_shape(), rng, 0.5);
    code = 0.5 * (code + w.mirror_code(code));
    const LandmarkSet face = w.decode(code);
    const SymmetricTarget t = symmetric_target(face, w, table());
    EXPECT_LE((t.code - w.encode(face)).norm(), 1e-6);
    EXPECT_LE(max_point_distance(t.face.points(), face.points()), 1e-6);
}

TEST(SymmetricTarget, AsymmetricInputBecomesSymmetric)
{
    const SyntheticWorld& w = world();
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        const LandmarkSet face = w.decode(random_code(w.latent_shape(), rng, 0.5));
        const SymmetricTarget t = symmetric_target(face, w, table());
        const MetricVector m = compute_metrics(align(t.face, table()), table());
        for (std::size_t i = 0; i < kMetricCount; ++i) EXPECT_LT(m[i], 1e-6) << metric_key(Metric(i));

        // Oracle: in a linear world the midpoint face is the average of the
        // two half-mirrored faces, each projected onto the manifold.
        const LandmarkSet l = w.decode(w.encode(mirror_face(face, table(), Side::left)));
        const LandmarkSet r = w.decode(w.encode(mirror_face(face, table(), Side::right)));
        for (std::size_t i = 0; i < kLandmarkCount; ++i) {
            EXPECT_LE((t.face[i] - 0.5 * (l[i] + r[i])).norm(), 1e-9);
        }
        const LatentCode mean = 0.5 * (t.code_left + t.code_right);
        EXPECT_EQ(t.code, mean);
    }
}

TEST(SymmetricTarget, NeverRaisesMetrics)
{
    const SyntheticWorld& w = world();
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 5; ++trial) {
        const LandmarkSet face = w.decode(random_code(w.latent_shape(), rng, 0.5));
        const MetricVector before = compute_metrics(align(face, table()), table());
        const MetricVector after = compute_metrics(align(symmetric_target(face, w, table()).face, table()), table());
        for (std::size_t i = 0; i < kMetricCount; ++i) EXPECT_LE(after[i], before[i] + 1e-6);
    }
}

TEST(World, SerializationReproducesDecode)
{
    const SyntheticWorld& w = world();
    const SyntheticWorld back = load_world(save_world(w));
    std::mt19937_64 rng(16);
    const LatentCode code = random_code(w.latent_shape(), rng, 0.5);
    EXPECT_EQ(w.decode(code), back.decode(code));
    EXPECT_EQ(w.version_hash(), back.version_hash());
}

TEST(World, SameSeedSameWorld)
{
    EXPECT_EQ(save_world(SyntheticWorld::create({})), save_world(world()));
    SyntheticWorldConfig other;
    other.seed = 1;
    EXPECT_NE(SyntheticWorld::create(other).version_hash(), world().version_hash());
}

TEST(World, EpsilonOutsideRangeIsRejected)
{
    SyntheticWorldConfig c;
    c.epsilon = 0.3;
    EXPECT_THROW((void)SyntheticWorld::create(c), Error);
}

TEST(World, MirrorCodeMirrorsTheFace)
{
    const SyntheticWorld& w = world();
    std::mt19937_64 rng(17);
    const LatentCode code = random_code(w.latent_shape(), rng, 0.5);
    const LandmarkSet face = w.decode(code);
    const LandmarkSet mirrored = w.decode(w.mirror_code(code));
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const Point2& q = face[table().mirror[i]];
        EXPECT_NEAR(mirrored[i].x(), 256.0 - q.x(), 1e-9);
        EXPECT_NEAR(mirrored[i].y(), q.y(), 1e-9);
    }
}
