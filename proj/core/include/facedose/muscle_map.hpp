#pragma once

#include "facedose/region_table.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace facedose {

inline constexpr std::size_t kMuscleCount = 22;
inline constexpr double kDefaultDoseBound = 10.0;

/// Toxin units per muscle, indexed like MuscleMap::labels.
struct DoseVector
{
    std::array<double, kMuscleCount> units{};

    double operator[](std::size_t j) const { return units[j]; }
    double& operator[](std::size_t j) { return units[j]; }
    double total() const;
    friend bool operator==(const DoseVector&, const DoseVector&) = default;
};

using DoseBounds = std::array<double, kMuscleCount>;

DoseBounds default_dose_bounds();

/// Throws Error(out_of_bounds, location "u[j]") for the first negative or
/// over-bound entry and Error(invalid_data) for a non-finite one.
void check_dose(const DoseVector& dose, const DoseBounds& bounds);

/// Muscle labels and the region each muscle acts on. The shipped labeling
/// is a placeholder grouping (4 brow, 3 eye, 4 mouth muscles per side);
/// only the count and the region assignment matter downstream.
struct MuscleMap
{
    std::vector<std::string> labels;
    std::vector<Region> region;

    /// Throws Error(invalid_config) unless there are 22 muscles and every
    /// region has at least one.
    void validate() const;
    std::vector<int> muscles_of(Region r) const;

    static const MuscleMap& standard();
};

} // namespace facedose
