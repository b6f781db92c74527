#include "facedose/region_table.hpp"

#include "facedose/error.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace facedose {

namespace {

constexpr std::string_view kRegionNames[kRegionCount] = {"brow_L", "brow_R", "eye_L",
                                                         "eye_R",  "mouth_L", "mouth_R"};

void check_index(int i, const std::string& where)
{
    if (i < 0 || i >= static_cast<int>(kLandmarkCount)) {
        throw Error(Errc::invalid_config, "landmark index " + std::to_string(i) + " out of range", where);
    }
}

void check_list(const std::vector<int>& list, const std::string& where)
{
    if (list.empty()) {
        throw Error(Errc::invalid_config, "index list is empty", where);
    }
    for (std::size_t k = 0; k < list.size(); ++k) {
        check_index(list[k], where + "[" + std::to_string(k) + "]");
    }
}

void check_pair(const std::vector<int>& left, const std::vector<int>& right, const std::vector<int>& mirror,
                const std::string& name)
{
    check_list(left, name + "_left");
    check_list(right, name + "_right");
    if (left.size() != right.size()) {
        throw Error(Errc::invalid_config, "left and right lists differ in length", name);
    }
    for (std::size_t k = 0; k < left.size(); ++k) {
        if (mirror[left[k]] != right[k]) {
            throw Error(Errc::invalid_config, "left/right lists disagree with the mirror correspondence",
                        name + "[" + std::to_string(k) + "]");
        }
    }
}

RegionIndexTable build_standard()
{
    RegionIndexTable t;
    // Upper row outer -> inner, then lower row outer -> inner.
    t.brow_left = {70, 63, 105, 66, 107, 46, 53, 52, 65, 55};
    t.brow_right = {300, 293, 334, 296, 336, 276, 283, 282, 295, 285};
    // Outer corner, lower lid outer -> inner, inner corner, upper lid inner -> outer.
    t.eye_left = {33, 7, 163, 144, 145, 153, 154, 155, 133, 173, 157, 158, 159, 160, 161, 246};
    t.eye_right = {263, 249, 390, 373, 374, 380, 381, 382, 362, 398, 384, 385, 386, 387, 388, 466};
    t.furrow_left = {202, 212, 216, 206, 203, 129, 209, 126};
    t.furrow_right = {422, 432, 436, 426, 423, 358, 429, 355};
    t.mouth_corner_left = 61;
    t.mouth_corner_right = 291;
    t.outer_brow_left = 46;
    t.outer_brow_right = 276;
    t.nose_tip = 1;
    t.mouth_center = {13, 14};

    const std::vector<int> lips_left = {61, 185, 40, 146, 91, 78, 191, 95};
    const std::vector<int> lips_right = {291, 409, 270, 375, 321, 308, 415, 324};
    const std::vector<int> midline = {0,  1,  2,  4,  5,  6,  8,  9,   10,  11,  12,  13,  14,  15,
                                      16, 17, 18, 19, 94, 151, 152, 164, 168, 175, 195, 197, 199, 200};

    t.mirror.assign(kLandmarkCount, -1);
    auto link = [&t](const std::vector<int>& l, const std::vector<int>& r) {
        for (std::size_t k = 0; k < l.size(); ++k) {
            t.mirror[l[k]] = r[k];
            t.mirror[r[k]] = l[k];
        }
    };
    link(t.brow_left, t.brow_right);
    link(t.eye_left, t.eye_right);
    link(t.furrow_left, t.furrow_right);
    link(lips_left, lips_right);
    for (int i : midline) t.mirror[i] = i;

    // Indices outside the named structures: paired consecutively. Only the
    // named structures above feed any metric.
    std::vector<int> rest;
    for (int i = 0; i < static_cast<int>(kLandmarkCount); ++i) {
        if (t.mirror[i] < 0) rest.push_back(i);
    }
    for (std::size_t k = 0; k + 1 < rest.size(); k += 2) {
        t.mirror[rest[k]] = rest[k + 1];
        t.mirror[rest[k + 1]] = rest[k];
    }
    if (rest.size() % 2 == 1) t.mirror[rest.back()] = rest.back();

    t.roi_regions[static_cast<int>(Region::brow_left)] = t.brow_left;
    t.roi_regions[static_cast<int>(Region::brow_right)] = t.brow_right;
    t.roi_regions[static_cast<int>(Region::eye_left)] = t.eye_left;
    t.roi_regions[static_cast<int>(Region::eye_right)] = t.eye_right;
    std::vector<int> mouth_l = lips_left, mouth_r = lips_right;
    mouth_l.insert(mouth_l.end(), t.furrow_left.begin(), t.furrow_left.end());
    mouth_r.insert(mouth_r.end(), t.furrow_right.begin(), t.furrow_right.end());
    t.roi_regions[static_cast<int>(Region::mouth_left)] = mouth_l;
    t.roi_regions[static_cast<int>(Region::mouth_right)] = mouth_r;
    t.assign_default_sides();
    t.validate();
    return t;
}

} // namespace

std::string_view region_name(Region region) noexcept
{
    return kRegionNames[static_cast<int>(region)];
}

std::optional<Region> region_from_name(std::string_view name) noexcept
{
    for (std::size_t k = 0; k < kRegionCount; ++k) {
        if (kRegionNames[k] == name) return static_cast<Region>(k);
    }
    return std::nullopt;
}

Region mirror_region(Region region) noexcept
{
    const int k = static_cast<int>(region);
    return static_cast<Region>(k % 2 == 0 ? k + 1 : k - 1);
}

void RegionIndexTable::validate() const
{
    if (mirror.size() != kLandmarkCount) {
        throw Error(Errc::invalid_config, "mirror correspondence must cover all 468 landmarks", "mirror");
    }
    for (std::size_t i = 0; i < mirror.size(); ++i) {
        check_index(mirror[i], "mirror[" + std::to_string(i) + "]");
        if (mirror[mirror[i]] != static_cast<int>(i)) {
            throw Error(Errc::invalid_config, "mirror correspondence is not an involution",
                        "mirror[" + std::to_string(i) + "]");
        }
    }
    if (side.size() != kLandmarkCount) {
        throw Error(Errc::invalid_config, "side assignment must cover all 468 landmarks", "side");
    }
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const bool self = mirror[i] == static_cast<int>(i);
        const bool ok = self ? side[i] == Side::midline
                             : (side[i] != Side::midline && side[mirror[i]] != Side::midline && side[i] != side[mirror[i]]);
        if (!ok) {
            throw Error(Errc::invalid_config, "side assignment disagrees with the mirror correspondence",
                        "side[" + std::to_string(i) + "]");
        }
    }
    check_pair(brow_left, brow_right, mirror, "brow");
    check_pair(eye_left, eye_right, mirror, "eye");
    check_pair(furrow_left, furrow_right, mirror, "furrow");
    check_pair({mouth_corner_left}, {mouth_corner_right}, mirror, "mouth_corner");
    check_pair({outer_brow_left}, {outer_brow_right}, mirror, "outer_brow");
    check_index(nose_tip, "nose_tip");
    check_list(mouth_center, "mouth_center");
    for (std::size_t k = 0; k < kRegionCount; k += 2) {
        const std::string name{kRegionNames[k]};
        check_pair(roi_regions[k], roi_regions[k + 1], mirror, "roi_regions." + name.substr(0, name.size() - 2));
    }
    std::set<int> seen;
    for (std::size_t k = 0; k < kRegionCount; ++k) {
        for (int i : roi_regions[k]) {
            if (!seen.insert(i).second) {
                throw Error(Errc::invalid_config, "landmark " + std::to_string(i) + " belongs to two regions",
                            "roi_regions." + std::string(kRegionNames[k]));
            }
        }
    }
}

void RegionIndexTable::assign_default_sides()
{
    side.assign(kLandmarkCount, Side::midline);
    for (std::size_t i = 0; i < kLandmarkCount && i < mirror.size(); ++i) {
        const int m = mirror[i];
        if (m == static_cast<int>(i)) continue;
        side[i] = static_cast<int>(i) < m ? Side::left : Side::right;
    }
    auto mark = [this](const std::vector<int>& l, const std::vector<int>& r) {
        for (int i : l) side.at(i) = Side::left;
        for (int i : r) side.at(i) = Side::right;
    };
    mark(brow_left, brow_right);
    mark(eye_left, eye_right);
    mark(furrow_left, furrow_right);
    for (std::size_t k = 0; k < kRegionCount; k += 2) mark(roi_regions[k], roi_regions[k + 1]);
}

const RegionIndexTable& RegionIndexTable::standard()
{
    static const RegionIndexTable table = build_standard();
    return table;
}

Point2 centroid(std::span<const Point2> points, std::span<const int> indices)
{
    Point2 sum = Point2::Zero();
    for (int i : indices) sum += points[i];
    return sum / static_cast<double>(indices.size());
}

} // namespace facedose
