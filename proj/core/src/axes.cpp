#include "facedose/axes.hpp"

#include "facedose/error.hpp"
#include "facedose/face_topology.hpp"
#include "facedose/geometry.hpp"

#include <cmath>
#include <string>

namespace facedose {

RoiSet default_roi_masks(const RegionIndexTable& table, double margin)
{
    const std::vector<Point2> base = synthetic_base_face(table);
    RoiSet out;
    for (Region r : kAllRegions) {
        const Box b = bounding_box(base, table.roi(r)).dilated(margin);
        out[static_cast<int>(r)] = RoiMask{r, RoiRect{b.x0, b.y0, b.x1, b.y1}};
    }
    validate_roi_set(out);
    return out;
}

void validate_roi_set(const RoiSet& masks)
{
    for (std::size_t k = 0; k < kRegionCount; ++k) {
        const RoiMask& m = masks[k];
        const std::string where = "roi[" + std::to_string(k) + "]";
        if (m.region != kAllRegions[k]) {
            throw Error(Errc::invalid_config, "mask is stored at the wrong region slot", where);
        }
        const RoiRect& r = m.rect;
        if (!(std::isfinite(r.x0) && std::isfinite(r.y0) && std::isfinite(r.x1) && std::isfinite(r.y1))) {
            throw Error(Errc::invalid_config, "rect has non-finite corners", where);
        }
        if (!(r.x0 < r.x1 && r.y0 < r.y1)) {
            throw Error(Errc::invalid_config, "rect must satisfy x0 < x1 and y0 < y1", where);
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (masks[j].rect.intersects(r)) {
                throw Error(Errc::invalid_config,
                            std::string("rect overlaps ") + std::string(region_name(masks[j].region)), where);
            }
        }
    }
}

LandmarkSet patch_roi(const LandmarkSet& src, const LandmarkSet& tgt, const RoiMask& mask)
{
    if (!(src.frame() == tgt.frame())) {
        throw Error(Errc::shape_mismatch, "patch_roi needs both faces in the same frame");
    }
    std::vector<Point2> out(src.points().begin(), src.points().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (mask.rect.contains(src[i])) out[i] = tgt[i];
    }
    return LandmarkSet(std::move(out), src.frame());
}

AlphaVector clamp_alpha(const AlphaVector& alpha)
{
    AlphaVector out;
    for (std::size_t k = 0; k < kRegionCount; ++k) out[k] = std::clamp(alpha[k], kAlphaMin, kAlphaMax);
    return out;
}

void check_alpha(const AlphaVector& alpha)
{
    for (std::size_t k = 0; k < kRegionCount; ++k) {
        const std::string where = "alpha[" + std::to_string(k) + "]";
        if (!std::isfinite(alpha[k])) throw Error(Errc::invalid_data, "alpha must be finite", where);
        if (alpha[k] < kAlphaMin || alpha[k] > kAlphaMax) {
            throw Error(Errc::out_of_bounds, "alpha outside [-0.5, 1.5]", where);
        }
    }
}

std::vector<LatentCode> discover_axis_list(const LandmarkSet& src, const LandmarkSet& tgt,
                                           std::span<const RoiMask> masks, const Generator& world)
{
    const LatentCode w_src = world.encode(src);
    std::vector<LatentCode> axes;
    axes.reserve(masks.size());
    for (const RoiMask& m : masks) {
        // Re-encoding the hybrid is the manifold projection that heals the seam.
        axes.push_back(world.encode(patch_roi(src, tgt, m)) - w_src);
    }
    return axes;
}

AxisBasis discover_axes(const LandmarkSet& src, const LandmarkSet& tgt, const RoiSet& masks, const Generator& world,
                        std::string patient_id)
{
    validate_roi_set(masks);
    std::vector<LatentCode> list = discover_axis_list(src, tgt, masks, world);
    AxisBasis basis;
    basis.patient_id = std::move(patient_id);
    for (std::size_t k = 0; k < kRegionCount; ++k) basis.axes[k] = std::move(list[k]);
    return basis;
}

LatentCode combine(const LatentCode& w_src, const AxisBasis& basis, const AlphaVector& alpha)
{
    LatentCode out = w_src;
    for (std::size_t k = 0; k < kRegionCount; ++k) {
        require_same_shape(w_src, basis.axes[k], "combine");
        if (!std::isfinite(alpha[k])) throw Error(Errc::invalid_data, "alpha must be finite", "alpha");
        if (alpha[k] != 0.0) out.flat() += alpha[k] * basis.axes[k].flat();
    }
    return out;
}

std::array<double, kRegionCount> region_deviations(const LandmarkSet& face, const LandmarkSet& reference,
                                                   const RegionIndexTable& table)
{
    const CanonicalLandmarks a = as_canonical({face.points().begin(), face.points().end()}, table);
    const CanonicalLandmarks b = as_canonical({reference.points().begin(), reference.points().end()}, table);
    std::array<double, kRegionCount> out{};
    for (Region r : kAllRegions) out[static_cast<int>(r)] = region_deviation(a, b, table.roi(r));
    return out;
}

} // namespace facedose
