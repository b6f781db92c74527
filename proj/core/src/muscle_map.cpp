#include "facedose/muscle_map.hpp"

#include "facedose/error.hpp"

#include <cmath>
#include <numeric>

namespace facedose {

double DoseVector::total() const
{
    return std::accumulate(units.begin(), units.end(), 0.0);
}

DoseBounds default_dose_bounds()
{
    DoseBounds b;
    b.fill(kDefaultDoseBound);
    return b;
}

void check_dose(const DoseVector& dose, const DoseBounds& bounds)
{
    for (std::size_t j = 0; j < kMuscleCount; ++j) {
        const std::string where = "u[" + std::to_string(j) + "]";
        if (!std::isfinite(dose[j])) throw Error(Errc::invalid_data, "dose must be finite", where);
        if (dose[j] < 0.0) throw Error(Errc::out_of_bounds, "dose must be non-negative", where);
        if (dose[j] > bounds[j]) {
            throw Error(Errc::out_of_bounds, "dose exceeds the muscle bound of " + std::to_string(bounds[j]) + " U",
                        where);
        }
    }
}

void MuscleMap::validate() const
{
    if (labels.size() != kMuscleCount || region.size() != kMuscleCount) {
        throw Error(Errc::invalid_config, "muscle map must list exactly 22 muscles", "labels");
    }
    for (Region r : kAllRegions) {
        if (muscles_of(r).empty()) {
            throw Error(Errc::invalid_config, "region has no muscle", std::string(region_name(r)));
        }
    }
}

std::vector<int> MuscleMap::muscles_of(Region r) const
{
    std::vector<int> out;
    for (std::size_t j = 0; j < region.size(); ++j)
        if (region[j] == r) out.push_back(static_cast<int>(j));
    return out;
}

const MuscleMap& MuscleMap::standard()
{
    static const MuscleMap map = [] {
        const std::array<std::vector<std::string>, 3> per_kind{{
            {"frontalis_medial", "frontalis_lateral", "corrugator", "depressor_supercilii"},
            {"orbicularis_oculi_upper", "orbicularis_oculi_lateral", "orbicularis_oculi_lower"},
            {"depressor_anguli_oris", "zygomaticus_major", "levator_labii", "risorius"},
        }};
        MuscleMap m;
        for (Region r : kAllRegions) {
            const int kind = static_cast<int>(r) / 2;
            const char* suffix = static_cast<int>(r) % 2 == 0 ? "_L" : "_R";
            for (const std::string& name : per_kind[kind]) {
                m.labels.push_back(name + suffix);
                m.region.push_back(r);
            }
        }
        m.validate();
        return m;
    }();
    return map;
}

} // namespace facedose
