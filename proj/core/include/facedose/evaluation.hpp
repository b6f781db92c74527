#pragma once

#include "facedose/axes.hpp"
#include "facedose/cohort.hpp"
#include "facedose/doseresponse.hpp"
#include "facedose/faceworld.hpp"
#include "facedose/gbm.hpp"
#include "facedose/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace facedose {

using MetricArray = std::array<double, kMetricCount>;

/// Agreement statistics for one metric. Degenerate truth (zero variance)
/// leaves pearson as NaN, and r2 as -inf unless the prediction is exact.
struct MetricScore
{
    double mae = 0.0;
    double r2 = 0.0;
    double pearson = 0.0;
    std::size_t n = 0;

    bool pearson_defined() const;
    bool r2_defined() const;
};

/// Pearson correlation; NaN when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Scores one metric. Throws Error(shape_mismatch) for different lengths
/// and Error(insufficient_data) for fewer than 2 pairs.
MetricScore score_metric(std::span<const double> pred, std::span<const double> truth);

std::array<MetricScore, kMetricCount> score(std::span<const MetricArray> pred, std::span<const MetricArray> truth);

// ------------------------------------------------------------ pipeline glue

/// What a pre-treatment photo yields: its code, axes toward the symmetric
/// target, and metrics, all in the canonical frame.
struct SourceState
{
    LatentCode w_src;
    AxisBasis basis;
    MetricVector m_src;
};

SourceState source_state(const LandmarkSet& photo, const std::string& patient_id, const Generator& world,
                         const RegionIndexTable& table, const RoiSet& masks);

/// Pre-treatment state of one test case. Carries nothing from the post
/// sessions, so models evaluated on it cannot see the outcome.
struct TestInput
{
    std::string patient_id;
    std::string expression;
    LatentCode w_src;
    AxisBasis basis;
    MetricVector m_src;
    DoseVector u;
};

struct TestOutcome
{
    std::string patient_id;
    std::string expression;
    MetricVector m_post;
};

/// One training case per (patient, expression) holding both a pre and a
/// post session (latest of each). Throws Error(insufficient_data) if a
/// patient has no such pair.
std::vector<TrainingCase> build_training_cases(std::span<const PatientRecord> records, const Generator& world,
                                               const RegionIndexTable& table, const RoiSet& masks);

/// Test inputs from pre sessions only. Throws Error(invalid_data) if any
/// record still has a post session, which guards the data flow.
std::vector<TestInput> build_test_inputs(std::span<const PatientRecord> pre_only, const Generator& world,
                                         const RegionIndexTable& table, const RoiSet& masks);

/// Post metrics per (patient, expression), in the order of build_test_inputs.
std::vector<TestOutcome> build_test_outcomes(std::span<const PatientRecord> records, const RegionIndexTable& table);

/// Fills alpha_gt of every case by analysis-by-synthesis.
void calibrate_cases(std::vector<TrainingCase>& cases, const Generator& world, const RegionIndexTable& table,
                     const CalibrationOptions& options = {});

// ---------------------------------------------------------------- reports

struct EvalConfig
{
    GbmConfig gbm{};
    CalibrationOptions calibration{};
    std::uint64_t seed = 0;
    /// Shuffled-dose control repetitions; 0 skips the control.
    int control_repeats = 0;
};

struct CasePrediction
{
    std::string patient_id;
    std::string expression;
    MetricVector m_src;
    MetricVector m_post;
    std::array<std::optional<double>, kMetricCount> true_dm;
    std::optional<MetricVector> post_a;
    std::optional<MetricVector> post_b;
};

struct EvalReport
{
    std::size_t n_train_cases = 0;
    std::size_t n_test = 0;
    std::string config_hash;
    std::int64_t timestamp = 0; ///< latest session timestamp of the inputs
    std::optional<std::array<MetricScore, kMetricCount>> a;
    std::optional<std::array<MetricScore, kMetricCount>> b;
    /// Mean held-out Pearson over shuffled-dose retrainings.
    std::optional<MetricArray> control_a;
    std::optional<MetricArray> control_b;
    std::vector<CasePrediction> cases;
};

/// Relative deltas of predicted post metrics; nullopt where m_src is tiny.
std::array<std::optional<double>, kMetricCount> predicted_delta(const MetricVector& m_src,
                                                                const std::optional<MetricVector>& post);

/// Scores whichever models are given on the test inputs.
EvalReport evaluate_models(const GbmModel* model_a, const GbmModel* model_b, std::span<const TestInput> inputs,
                           std::span<const TestOutcome> outcomes, const Generator& world,
                           const RegionIndexTable& table);

/**
 * Mean held-out Pearson per metric after retraining on training cases whose
 * doses were permuted across patients, over `repeats` seeded permutations.
 * Calibrated alphas are kept; only the forward models are retrained.
 */
std::pair<MetricArray, MetricArray> shuffled_dose_control(std::span<const TrainingCase> calibrated,
                                                          std::span<const TestInput> inputs,
                                                          std::span<const TestOutcome> outcomes,
                                                          const GbmConfig& gbm, int repeats, std::uint64_t seed,
                                                          const Generator& world, const RegionIndexTable& table);

/// The full protocol: build and calibrate training cases, train both
/// approaches, score them on the held-out patients. Post sessions of the
/// test records are only used for scoring.
EvalReport run_comparison(std::span<const PatientRecord> train, std::span<const PatientRecord> test,
                          const EvalConfig& config, const Generator& world, const RegionIndexTable& table,
                          const RoiSet& masks);

/// Scores already trained models (either may be null) on the test records.
/// n_train_cases stays 0 and no control is run.
EvalReport evaluate_trained(const GbmModel* model_a, const GbmModel* model_b, std::span<const PatientRecord> test,
                            const EvalConfig& config, const Generator& world, const RegionIndexTable& table,
                            const RoiSet& masks);

/// Stable hash of the evaluation settings and the generator.
std::string config_hash(const EvalConfig& config, const Generator& world);

/// Six-row comparison table: "Eyebrows Asym. | MAE A x / B y | R² A .. / B .. | r A .. / B .. | MAE×100 A .. / B ..".
std::string render_table(const EvalReport& report);
std::string report_json(const EvalReport& report);
/// One line per test case with source, true and predicted post metrics.
std::string predictions_csv(const EvalReport& report);

} // namespace facedose
