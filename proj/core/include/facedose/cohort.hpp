#pragma once

#include "facedose/axes.hpp"
#include "facedose/faceworld.hpp"
#include "facedose/landmarks.hpp"
#include "facedose/muscle_map.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace facedose {

enum class Phase { pre, post };

std::string_view phase_name(Phase p) noexcept;

/// One photographed expression of a patient.
struct Session
{
    std::string expression;
    LandmarkSet landmarks;
    std::int64_t timestamp = 0; ///< seconds since the epoch
    Phase phase = Phase::pre;

    friend bool operator==(const Session&, const Session&) = default;
};

struct PatientRecord
{
    std::string patient_id;
    std::vector<Session> sessions;
    DoseVector dose;
    std::map<std::string, std::string> metadata;

    friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

/// The standardized expression sequence, neutral first.
inline constexpr std::array<std::string_view, 8> kExpressions{
    "neutral", "smile", "brow_raise", "eye_close", "frown", "pucker", "nose_wrinkle", "show_teeth"};

struct CohortConfig
{
    int n_patients = 46;
    int images_per_patient = 8; ///< expressions photographed, each pre and post
    std::uint64_t seed = 0;
    /// Multiplies every planted unilateral droop.
    double asymmetry_scale = 1.0;
    /// 6 x 22 region-aligned gain matrix A; drawn from the seed when empty.
    Eigen::MatrixXd gain;
    double saturation = 1.0; ///< c in alpha = 1 - exp(-c A u)
    double noise_sigma = 0.0; ///< landmark noise on photographed sessions, pixels
    double dose_probability = 0.9; ///< chance that a left/right region pair is treated
    /// Upper end of a treated region's dose level, before per-muscle jitter.
    double max_dose = 6.0;
    /// Every n-th patient (starting with the first) gets no dose; 0 disables.
    int zero_dose_every = 10;
    SyntheticWorldConfig world{};

    /// Throws Error(invalid_config) naming the offending field.
    void validate(const MuscleMap& muscles = MuscleMap::standard()) const;
};

/// Hidden oracle state of one patient.
struct PatientTruth
{
    std::string patient_id;
    AlphaVector alpha;
    /// Per photographed expression, in session order.
    std::vector<std::string> expressions;
    std::vector<LatentCode> w_src;
    std::vector<AxisBasis> basis;
};

/// Ground truth kept apart from the records; only the evaluator reads it.
struct SealedTruth
{
    Eigen::MatrixXd gain;
    double saturation = 1.0;
    std::string world_hash;
    std::vector<PatientTruth> patients;
};

struct Cohort
{
    SyntheticWorld world;
    std::vector<PatientRecord> records;
    SealedTruth truth;
};

/// Region-aligned gain matrix with entries drawn from [0.03, 0.08] on each
/// muscle's own region and zero elsewhere.
Eigen::MatrixXd default_gain(std::uint64_t seed, const MuscleMap& muscles = MuscleMap::standard());

/// alpha_k = 1 - exp(-c (A u)_k).
AlphaVector dose_response(const Eigen::MatrixXd& gain, double saturation, const DoseVector& u);

/**
 * Synthetic patients with a known dose response. Each patient has a
 * mirror-symmetric identity, a unilateral droop in brows, eyes and mouth
 * (random side each) and small random asymmetry. Post faces are
 * decode(combine(w_src, basis, alpha_true)) with the basis discovered
 * against the symmetric target. Sessions are placed into photo frames by a
 * random similarity and receive noise_sigma landmark noise.
 */
Cohort generate_cohort(const CohortConfig& config, const RegionIndexTable& table = RegionIndexTable::standard());

struct PatientSplit
{
    std::vector<PatientRecord> train;
    std::vector<PatientRecord> test;
};

/// round(ratio * n) patients (clamped to [1, n - 1]) go to train, chosen by a
/// seeded shuffle of the id-sorted records. Throws Error(insufficient_data)
/// for fewer than 2 patients and Error(invalid_data) for duplicate ids.
PatientSplit split_by_patient(std::vector<PatientRecord> records, double ratio, std::uint64_t seed);

/// Throws Error(ingest_error) with a location such as "sessions[3].points"
/// or "dose[5]".
void validate_record(const PatientRecord& record, const DoseBounds& bounds = default_dose_bounds());

/// Reads one record file or every *.json file of a directory (sorted by
/// name). Each record is validated; failures carry "file: field" locations.
std::vector<PatientRecord> ingest(const std::filesystem::path& path, const DoseBounds& bounds = default_dose_bounds());

/// Writes one <patient_id>.json per record into `dir`.
void export_records(const std::vector<PatientRecord>& records, const std::filesystem::path& dir);

/// Copy of the record with every post-phase session removed.
PatientRecord without_post_sessions(const PatientRecord& record);

} // namespace facedose
