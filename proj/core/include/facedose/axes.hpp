#pragma once

#include "facedose/faceworld.hpp"
#include "facedose/region_table.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace facedose {

/// Axis-aligned rectangle in canonical coordinates, boundary inclusive.
struct RoiRect
{
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool contains(const Point2& p) const { return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1; }
    bool intersects(const RoiRect& o) const { return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1; }
    friend bool operator==(const RoiRect&, const RoiRect&) = default;
};

/// Binary mask M_k of one editable region.
struct RoiMask
{
    Region region = Region::brow_left;
    RoiRect rect;

    friend bool operator==(const RoiMask&, const RoiMask&) = default;
};

/// One mask per region, indexed by Region.
using RoiSet = std::array<RoiMask, kRegionCount>;

/// Region bounding boxes on the synthetic base face, dilated by `margin`.
RoiSet default_roi_masks(const RegionIndexTable& table = RegionIndexTable::standard(), double margin = 8.0);

/// Throws Error(invalid_config) for empty rects, a region listed at the
/// wrong slot, or overlapping rects.
void validate_roi_set(const RoiSet& masks);

/// Landmarks whose src position lies inside the rect come from tgt.
LandmarkSet patch_roi(const LandmarkSet& src, const LandmarkSet& tgt, const RoiMask& mask);

inline constexpr double kAlphaMin = -0.5;
inline constexpr double kAlphaMax = 1.5;

/// Per-region latent intensities, indexed by Region.
struct AlphaVector
{
    std::array<double, kRegionCount> values{};

    double operator[](std::size_t k) const { return values[k]; }
    double& operator[](std::size_t k) { return values[k]; }
    double operator[](Region r) const { return values[static_cast<int>(r)]; }
    double& operator[](Region r) { return values[static_cast<int>(r)]; }

    static AlphaVector unit(Region r)
    {
        AlphaVector a;
        a[r] = 1.0;
        return a;
    }

    friend AlphaVector operator+(AlphaVector a, const AlphaVector& b)
    {
        for (std::size_t k = 0; k < kRegionCount; ++k) a.values[k] += b.values[k];
        return a;
    }
    friend AlphaVector operator*(double s, AlphaVector a)
    {
        for (double& v : a.values) v *= s;
        return a;
    }
    friend bool operator==(const AlphaVector&, const AlphaVector&) = default;
};

AlphaVector clamp_alpha(const AlphaVector& alpha);

/// Throws Error(out_of_bounds, location "alpha[k]") for the first component
/// outside [kAlphaMin, kAlphaMax], or Error(invalid_data) if non-finite.
void check_alpha(const AlphaVector& alpha);

/// Latent displacement v_k per region.
struct AxisBasis
{
    std::string patient_id;
    std::array<LatentCode, kRegionCount> axes;

    const LatentCode& operator[](Region r) const { return axes[static_cast<int>(r)]; }
    LatentCode& operator[](Region r) { return axes[static_cast<int>(r)]; }

    friend bool operator==(const AxisBasis&, const AxisBasis&) = default;
};

/// v_k = encode(patch_roi(src, tgt, masks[k])) - encode(src), in the order
/// the masks are given.
std::vector<LatentCode> discover_axis_list(const LandmarkSet& src, const LandmarkSet& tgt,
                                           std::span<const RoiMask> masks, const Generator& world);

/// discover_axis_list over a full mask set, packaged by region.
AxisBasis discover_axes(const LandmarkSet& src, const LandmarkSet& tgt, const RoiSet& masks, const Generator& world,
                        std::string patient_id = {});

/// w_src + sum_k alpha_k v_k. Terms with alpha_k == 0 are skipped, so a
/// zero alpha returns w_src bit for bit. No clamping happens here.
LatentCode combine(const LatentCode& w_src, const AxisBasis& basis, const AlphaVector& alpha);

/// Procrustes deviation of each region of `face` from the same region of
/// `reference`, in Region order. Both faces canonical.
std::array<double, kRegionCount> region_deviations(const LandmarkSet& face, const LandmarkSet& reference,
                                                   const RegionIndexTable& table);

} // namespace facedose
