#pragma once

#include "facedose/landmarks.hpp"
#include "facedose/region_table.hpp"

#include <vector>

namespace facedose {

/// A mirror-symmetric frontal face in the canonical 256x256 frame, laid out
/// for the standard region table.
///
/// Its alignment anchors sit exactly on kCanonicalAnchors, every editable
/// region is separated from its neighbours by a gap wider than the default
/// ROI dilation, and all remaining points keep clear of the ROI rectangles.
/// Requires `table` to have the standard list lengths (10 brow, 16 eye,
/// 8 furrow points per side).
std::vector<Point2> synthetic_base_face(const RegionIndexTable& table);

/// Axis-aligned bounding box of the given landmarks.
struct Box
{
    double x0, y0, x1, y1;

    bool contains(const Point2& p) const { return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1; }
    Box dilated(double margin) const { return {x0 - margin, y0 - margin, x1 + margin, y1 + margin}; }
    bool intersects(const Box& o) const { return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1; }
};

Box bounding_box(std::span<const Point2> points, std::span<const int> indices);

} // namespace facedose
