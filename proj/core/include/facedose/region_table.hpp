#pragma once

#include "facedose/landmarks.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace facedose {

/// The six editable regions. The enumerator order is the order of every
/// per-region vector (alpha, axis basis, ROI masks).
enum class Region : int { brow_left = 0, brow_right, eye_left, eye_right, mouth_left, mouth_right };

inline constexpr std::size_t kRegionCount = 6;
inline constexpr std::array<Region, kRegionCount> kAllRegions{
    Region::brow_left, Region::brow_right, Region::eye_left,
    Region::eye_right, Region::mouth_left, Region::mouth_right};

std::string_view region_name(Region region) noexcept;
std::optional<Region> region_from_name(std::string_view name) noexcept;
/// brow_left <-> brow_right and so on.
Region mirror_region(Region region) noexcept;

enum class Side { left, right, midline };

/// Landmark index lists for every measured structure, plus the left/right
/// correspondence used for mirroring.
///
/// "Left" is the image-left side of a frontal face (smaller x in the
/// canonical frame). Each left list is paired element-wise with its right
/// list. `mirror` is an involution over all 468 indices: mirror[i] is the
/// counterpart of i, and midline points map to themselves.
struct RegionIndexTable
{
    std::vector<int> brow_left, brow_right;
    std::vector<int> eye_left, eye_right;
    std::vector<int> furrow_left, furrow_right;
    int mouth_corner_left = -1, mouth_corner_right = -1;
    int outer_brow_left = -1, outer_brow_right = -1;
    int nose_tip = -1;
    /// Points whose centroid is the mouth-center alignment anchor.
    std::vector<int> mouth_center;
    /// Landmarks belonging to each editable region, in Region order.
    std::array<std::vector<int>, kRegionCount> roi_regions;
    std::vector<int> mirror;
    /// Side of every landmark; mirror pairs always join a left and a right.
    std::vector<Side> side;

    /// Throws Error(invalid_config) naming the first broken invariant.
    void validate() const;

    Side side_of(int index) const { return side.at(index); }
    const std::vector<int>& roi(Region region) const { return roi_regions[static_cast<int>(region)]; }

    /// The shipped default for the 468-point face-mesh topology.
    static const RegionIndexTable& standard();

    /// Rebuilds `side` from the named left/right lists; remaining pairs put
    /// their lower index on the left.
    void assign_default_sides();
};

/// Canonical-frame positions the alignment anchors are mapped onto.
struct AnchorTemplate
{
    Point2 eye_left{88.0, 104.0};
    Point2 eye_right{168.0, 104.0};
    Point2 mouth_center{128.0, 180.0};

    double ipd() const { return (eye_right - eye_left).norm(); }
};

inline const AnchorTemplate kCanonicalAnchors{};

Point2 centroid(std::span<const Point2> points, std::span<const int> indices);

} // namespace facedose
