#include "facedose/face_topology.hpp"

#include "facedose/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>

namespace facedose {

namespace {

constexpr double kMid = kCanonicalSize / 2.0;

// Vertical positions of the self-mirrored points, top to bottom. Indices
// that are not listed here are spread over the forehead.
struct MidlineSlot
{
    int index;
    double y;
};

constexpr MidlineSlot kMidlineSlots[] = {
    {10, 22.0},  {151, 40.0}, {9, 58.0},   {8, 84.0},   {168, 96.0},  {6, 110.0}, {197, 122.0},
    {195, 132.0}, {5, 140.0},  {4, 146.0},  {1, 150.0},  {19, 156.0},  {94, 160.0}, {2, 163.0},
    {164, 168.0}, {0, 172.0},  {11, 174.0}, {12, 175.5}, {13, 177.0}, {14, 183.0}, {15, 185.0},
    {16, 187.0}, {17, 190.0}, {18, 196.0}, {200, 204.0}, {199, 212.0}, {175, 222.0}, {152, 240.0},
};

void place_pair(std::vector<Point2>& face, const RegionIndexTable& t, int left, Point2 p)
{
    face[left] = p;
    face[t.mirror[left]] = Point2(2.0 * kMid - p.x(), p.y());
}

void require_size(const std::vector<int>& list, std::size_t n, const char* what)
{
    if (list.size() != n) {
        throw Error(Errc::invalid_config, "synthetic base face needs the standard topology", what);
    }
}

} // namespace

Box bounding_box(std::span<const Point2> points, std::span<const int> indices)
{
    Box b{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
          std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
    for (int i : indices) {
        const Point2& p = points[i];
        b.x0 = std::min(b.x0, p.x());
        b.y0 = std::min(b.y0, p.y());
        b.x1 = std::max(b.x1, p.x());
        b.y1 = std::max(b.y1, p.y());
    }
    return b;
}

std::vector<Point2> synthetic_base_face(const RegionIndexTable& t)
{
    t.validate();
    require_size(t.brow_left, 10, "brow_left");
    require_size(t.eye_left, 16, "eye_left");
    require_size(t.furrow_left, 8, "furrow_left");

    const Point2 unset(std::numeric_limits<double>::quiet_NaN(), 0.0);
    std::vector<Point2> face(kLandmarkCount, unset);

    // Brows: upper row then lower row, each outer -> inner.
    constexpr double brow_x[5] = {62.0, 75.0, 88.0, 101.0, 114.0};
    constexpr double brow_upper_y[5] = {72.0, 68.0, 66.0, 67.0, 70.0};
    for (int j = 0; j < 5; ++j) {
        place_pair(face, t, t.brow_left[j], {brow_x[j], brow_upper_y[j]});
        place_pair(face, t, t.brow_left[j + 5], {std::min(brow_x[j] + 1.0, 114.0), brow_upper_y[j] + 6.0});
    }

    // Eyes: outer corner, lower lid outer -> inner, inner corner, upper lid inner -> outer.
    const Point2 eye_c = kCanonicalAnchors.eye_left;
    constexpr double half_w = 16.0, half_h = 5.0;
    for (int j = 0; j < 16; ++j) {
        double s;   // 0 at the outer corner, 1 at the inner corner
        double dir; // +1 lower lid, -1 upper lid
        if (j <= 8) {
            s = j / 8.0;
            dir = 1.0;
        } else {
            s = 1.0 - (j - 8) / 8.0;
            dir = -1.0;
        }
        const double x = eye_c.x() - half_w + 2.0 * half_w * s;
        const double y = eye_c.y() + dir * half_h * std::sin(std::numbers::pi * s);
        place_pair(face, t, t.eye_left[j], {x, y});
    }

    // Nasolabial furrow: from beside the nose ala down toward the mouth corner.
    for (int j = 0; j < 8; ++j) {
        const double s = j / 7.0;
        place_pair(face, t, t.furrow_left[j], {112.0 - 14.0 * s, 146.0 + 28.0 * s});
    }

    // Mouth: corner plus the remaining lip points of the mouth region, fanned
    // around the corner.
    place_pair(face, t, t.mouth_corner_left, {104.0, 180.0});
    {
        std::vector<int> extras;
        for (int i : t.roi(Region::mouth_left)) {
            if (i == t.mouth_corner_left) continue;
            if (std::find(t.furrow_left.begin(), t.furrow_left.end(), i) != t.furrow_left.end()) continue;
            extras.push_back(i);
        }
        const Point2 lip_slots[] = {{109.0, 176.0}, {114.0, 174.0}, {109.0, 184.0}, {114.0, 186.0},
                                        {108.0, 180.0}, {113.0, 178.0}, {113.0, 182.0}};
        if (extras.size() > std::size(lip_slots)) {
            throw Error(Errc::invalid_config, "too many mouth-region points for the synthetic face", "roi_regions");
        }
        for (std::size_t j = 0; j < extras.size(); ++j) {
            place_pair(face, t, extras[j], lip_slots[j]);
        }
    }

    // Midline points.
    std::vector<int> midline_unslotted;
    for (int i = 0; i < static_cast<int>(kLandmarkCount); ++i) {
        if (t.mirror[i] != i) continue;
        auto it = std::find_if(std::begin(kMidlineSlots), std::end(kMidlineSlots),
                               [i](const MidlineSlot& s) { return s.index == i; });
        if (it != std::end(kMidlineSlots)) {
            face[i] = {kMid, it->y};
        } else {
            midline_unslotted.push_back(i);
        }
    }
    for (std::size_t j = 0; j < midline_unslotted.size(); ++j) {
        face[midline_unslotted[j]] = {kMid, 14.0 + 2.0 * static_cast<double>(j)};
    }
    // The anchors are fixed by construction: mouth center and nose tip.
    {
        Point2 mc = centroid(face, t.mouth_center);
        if (std::isnan(mc.x()) || (mc - kCanonicalAnchors.mouth_center).norm() > 1e-12) {
            // Mouth-center points outside the slot table: put them on the anchor.
            for (int i : t.mouth_center) face[i] = kCanonicalAnchors.mouth_center;
        }
    }

    // Everything else: a symmetric scatter over the face that keeps clear of
    // the dilated region boxes.
    std::vector<Box> keep_out;
    for (Region r : kAllRegions) {
        keep_out.push_back(bounding_box(face, t.roi(r)).dilated(8.0 + 6.0));
    }
    std::vector<Point2> candidates;
    for (double y = 16.0; y <= 248.0; y += 8.0) {
        for (double x = 16.0; x <= 118.0; x += 6.0) {
            const double ex = (x - kMid) / 112.0, ey = (y - 134.0) / 122.0;
            if (ex * ex + ey * ey > 1.0) continue;
            const Point2 p(x, y);
            const Point2 q(2.0 * kMid - x, y);
            bool blocked = false;
            for (const Box& b : keep_out) {
                if (b.contains(p) || b.contains(q)) {
                    blocked = true;
                    break;
                }
            }
            if (!blocked) candidates.push_back(p);
        }
    }
    std::vector<int> rest_left;
    for (int i = 0; i < static_cast<int>(kLandmarkCount); ++i) {
        if (std::isnan(face[i].x()) && t.side[i] == Side::left) rest_left.push_back(i);
    }
    if (candidates.size() < rest_left.size()) {
        throw Error(Errc::invalid_config, "not enough free positions for the remaining landmarks");
    }
    for (std::size_t j = 0; j < rest_left.size(); ++j) {
        const std::size_t slot = j * candidates.size() / rest_left.size();
        place_pair(face, t, rest_left[j], candidates[slot]);
    }

    for (std::size_t i = 0; i < face.size(); ++i) {
        if (std::isnan(face[i].x())) {
            throw Error(Errc::invalid_config, "landmark left unplaced", "points[" + std::to_string(i) + "]");
        }
    }
    return face;
}

} // namespace facedose
