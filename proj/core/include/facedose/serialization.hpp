#pragma once

#include "facedose/axes.hpp"
#include "facedose/cohort.hpp"
#include "facedose/doseresponse.hpp"
#include "facedose/faceworld.hpp"
#include "facedose/gbm.hpp"
#include "facedose/region_table.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace facedose {

// Every document carries a "schema" field such as "facedose.world/1".
// Loaders throw Error(format_error) for malformed JSON, a missing or
// different schema, or fields of the wrong type, with the JSON path of the
// offending field as location. Doubles round-trip bit-exactly.

std::string save_world(const SyntheticWorld& world);
SyntheticWorld load_world(std::string_view text);

std::string save_region_table(const RegionIndexTable& table);
RegionIndexTable load_region_table(std::string_view text);

std::string save_roi_masks(const RoiSet& masks);
RoiSet load_roi_masks(std::string_view text);

/// world_hash identifies the generator the axes belong to.
std::string save_basis(const AxisBasis& basis, std::string_view world_hash);
AxisBasis load_basis(std::string_view text, std::string* world_hash = nullptr);

std::string save_gbm(const GbmModel& model);
GbmModel load_gbm(std::string_view text);

std::string save_bundle_a(const ApproachABundle& bundle);
ApproachABundle load_bundle_a(std::string_view text);

std::string save_landmarks(const LandmarkSet& landmarks);
LandmarkSet load_landmarks(std::string_view text);

/// Patient record files. load_record reports problems as Error(ingest_error).
std::string save_record(const PatientRecord& record);
PatientRecord load_record(std::string_view text);

std::string save_case(const TrainingCase& c);
TrainingCase load_case(std::string_view text);

std::string save_sealed_truth(const SealedTruth& truth);
SealedTruth load_sealed_truth(std::string_view text);

std::string save_training_report(const TrainingReport& report);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view text);

} // namespace facedose
