#include "cohort_fixture.hpp"
#include "test_faces.hpp"

#include <facedose/axes.hpp>
#include <facedose/error.hpp>
#include <facedose/serialization.hpp>

#include <gtest/gtest.h>

using namespace facedose;
using namespace facedose::testing;

namespace {

const SyntheticWorld& world()
{
    static const SyntheticWorld w = SyntheticWorld::create({});
    return w;
}

LandmarkSet asymmetric_patient(std::mt19937_64& rng)
{
    return world().decode(random_code(world().latent_shape(), rng, 0.6));
}

} // namespace

TEST(PatchRoi, SameFaceIsUnchanged)
{
    std::mt19937_64 rng(1);
    const LandmarkSet f = as_set(jittered_face(rng));
    for (const RoiMask& m : default_roi_masks()) EXPECT_EQ(patch_roi(f, f, m), f);
}

TEST(PatchRoi, EmptyMaskSelectsNothing)
{
    std::mt19937_64 rng(2);
    const LandmarkSet src = as_set(jittered_face(rng));
    const LandmarkSet tgt = as_set(jittered_face(rng));
    const RoiMask nowhere{Region::brow_left, {0, 0, 1, 1}};
    EXPECT_EQ(patch_roi(src, tgt, nowhere), src);
}

TEST(PatchRoi, LeftBrowMembership)
{
    std::mt19937_64 rng(3);
    const LandmarkSet src = asymmetric_patient(rng);
    const LandmarkSet tgt = symmetric_target(src, world(), table()).face;
    const RoiMask mask = default_roi_masks()[static_cast<int>(Region::brow_left)];
    const LandmarkSet out = patch_roi(src, tgt, mask);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const bool inside = mask.rect.contains(src[i]);
        EXPECT_EQ(out[i], inside ? tgt[i] : src[i]) << i;
    }
    for (int i : table().roi(Region::brow_left)) EXPECT_TRUE(mask.rect.contains(src[i]));
}

TEST(DefaultRoi, MatchesShippedRectangles)
{
    const RoiSet m = default_roi_masks();
    EXPECT_NO_THROW(validate_roi_set(m));
    EXPECT_EQ(m[0].rect, (RoiRect{54, 58, 122, 86}));
    EXPECT_EQ(m[1].rect, (RoiRect{134, 58, 202, 86}));
    EXPECT_EQ(m[4].rect, (RoiRect{90, 138, 122, 194}));
}

TEST(DefaultRoi, OverlapIsRejected)
{
    RoiSet m = default_roi_masks();
    m[1].rect = m[0].rect;
    EXPECT_THROW(validate_roi_set(m), Error);
}

TEST(DefaultRoi, EncloseRegionsAcrossPopulation)
{
    // Every session of the synthetic cohort, aligned, keeps each region inside its rectangle.
    const RoiSet masks = default_roi_masks();
    for (const PatientRecord& rec : shared_cohort().cohort.records) {
        for (const Session& s : rec.sessions) {
            const LandmarkSet f = align(s.landmarks, table()).to_landmark_set();
            for (Region r : kAllRegions) {
                for (int i : table().roi(r)) {
                    ASSERT_TRUE(masks[static_cast<int>(r)].rect.contains(f[i]))
                        << rec.patient_id << " " << s.expression << " " << region_name(r);
                }
            }
        }
    }
}

TEST(DiscoverAxes, SameFaceGivesZeroAxes)
{
    std::mt19937_64 rng(5);
    const LandmarkSet src = asymmetric_patient(rng);
    const AxisBasis b = discover_axes(src, src, default_roi_masks(), world());
    for (const LatentCode& v : b.axes) EXPECT_LE(v.norm(), 1e-9);
}

TEST(DiscoverAxes, PermutationEquivariant)
{
    std::mt19937_64 rng(6);
    const LandmarkSet src = asymmetric_patient(rng);
    const LandmarkSet tgt = symmetric_target(src, world(), table()).face;
    const RoiSet masks = default_roi_masks();
    const std::vector<RoiMask> forward(masks.begin(), masks.end());
    const std::vector<RoiMask> backward(masks.rbegin(), masks.rend());
    const auto a = discover_axis_list(src, tgt, forward, world());
    const auto b = discover_axis_list(src, tgt, backward, world());
    for (std::size_t k = 0; k < kRegionCount; ++k) EXPECT_EQ(a[k], b[kRegionCount - 1 - k]);
}

TEST(DiscoverAxes, LocalCorrection)
{
    std::mt19937_64 rng(7);
    const RoiSet masks = default_roi_masks();
    for (int p = 0; p < 10; ++p) {
        const LandmarkSet src = asymmetric_patient(rng);
        const LandmarkSet tgt = symmetric_target(src, world(), table()).face;
        const LatentCode w_src = world().encode(src);
        const AxisBasis basis = discover_axes(src, tgt, masks, world());
        const auto before = region_deviations(src, tgt, table());
        for (Region r : kAllRegions) {
            const int k = static_cast<int>(r);
            const LandmarkSet after_face = world().decode(combine(w_src, basis, AlphaVector::unit(r)));
            const auto after = region_deviations(after_face, tgt, table());
            const double drop = before[k] - after[k];
            EXPECT_GE(drop, 0.8 * before[k]) << "patient " << p << " " << region_name(r);
            for (std::size_t j = 0; j < kRegionCount; ++j) {
                if (j != static_cast<std::size_t>(k)) EXPECT_LE(std::abs(after[j] - before[j]), 0.1 * drop);
            }
        }
    }
}

TEST(DiscoverAxes, MonotoneAlongEachAxis)
{
    std::mt19937_64 rng(8);
    const LandmarkSet src = asymmetric_patient(rng);
    const LandmarkSet tgt = symmetric_target(src, world(), table()).face;
    const LatentCode w_src = world().encode(src);
    const AxisBasis basis = discover_axes(src, tgt, default_roi_masks(), world());
    for (Region r : kAllRegions) {
        const int k = static_cast<int>(r);
        double previous = INFINITY;
        for (int step = 0; step <= 10; ++step) {
            const LandmarkSet f = world().decode(combine(w_src, basis, (0.1 * step) * AlphaVector::unit(r)));
            const double d = region_deviations(f, tgt, table())[k];
            EXPECT_LE(d, previous + 1e-12) << region_name(r) << " t=" << 0.1 * step;
            previous = d;
        }
    }
}

TEST(Combine, ZeroAlphaIsBitwiseSource)
{
    std::mt19937_64 rng(9);
    const LatentCode w = random_code(world().latent_shape(), rng);
    EXPECT_EQ(combine(w, random_basis(world().latent_shape(), rng), AlphaVector{}), w);
}

TEST(Combine, UnitAlphaAddsOneAxis)
{
    std::mt19937_64 rng(10);
    const LatentCode w = random_code(world().latent_shape(), rng);
    const AxisBasis b = random_basis(world().latent_shape(), rng);
    for (Region r : kAllRegions) EXPECT_EQ(combine(w, b, AlphaVector::unit(r)), w + b[r]);
}

TEST(Combine, Additive)
{
    std::mt19937_64 rng(11);
    const LatentCode w = random_code(world().latent_shape(), rng);
    const AxisBasis b = random_basis(world().latent_shape(), rng);
    const AlphaVector a = random_alpha(rng), a2 = random_alpha(rng);
    const LatentCode twice = combine(combine(w, b, a), b, a2);
    EXPECT_LE((twice - combine(w, b, a + a2)).flat().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Combine, ShapeMismatch)
{
    std::mt19937_64 rng(12);
    const AxisBasis b = random_basis({2, 8}, rng);
    try {
        (void)combine(LatentCode::zeros(world().latent_shape()), b, AlphaVector::unit(Region::eye_left));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::shape_mismatch);
    }
}

TEST(Alpha, ClampAndCheck)
{
    AlphaVector a;
    a[Region::mouth_right] = 2.0;
    a[Region::brow_left] = -1.0;
    const AlphaVector c = clamp_alpha(a);
    EXPECT_EQ(c[Region::mouth_right], kAlphaMax);
    EXPECT_EQ(c[Region::brow_left], kAlphaMin);
    try {
        check_alpha(a);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::out_of_bounds);
        EXPECT_EQ(e.location(), "alpha[0]");
    }
    EXPECT_NO_THROW(check_alpha(c));
}

TEST(Basis, SerializationRoundTrip)
{
    std::mt19937_64 rng(13);
    AxisBasis b = random_basis(world().latent_shape(), rng);
    b.patient_id = "P007";
    std::string hash;
    const AxisBasis back = load_basis(save_basis(b, world().version_hash()), &hash);
    EXPECT_EQ(back, b);
    EXPECT_EQ(hash, world().version_hash());
}
