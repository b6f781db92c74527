#pragma once

#include "facedose/axes.hpp"
#include "facedose/faceworld.hpp"
#include "facedose/gbm.hpp"
#include "facedose/geometry.hpp"
#include "facedose/muscle_map.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace facedose {

/// Feature layout shared by both approaches: u_1..u_22 then m_1..m_6.
inline constexpr std::size_t kFeatureCount = kMuscleCount + kMetricCount;

std::array<double, kFeatureCount> dose_features(const DoseVector& u, const MetricVector& m_src);

/// One (patient, expression) training example.
struct TrainingCase
{
    std::string patient_id;
    std::string expression;
    LatentCode w_src;
    AxisBasis basis;
    MetricVector m_src;
    MetricVector m_post;
    DoseVector u;
    std::optional<AlphaVector> alpha_gt;
    /// Aligned post-treatment landmarks, when the case came from images.
    std::optional<LandmarkSet> post_face;
};

/// What calibrate_alpha matches against the observed post-treatment state.
enum class CalibrationObjective {
    /// IPD-normalized squared landmark distance to the aligned post face.
    landmarks,
    /// Squared distance between the six metrics and m_post.
    metrics,
};

struct CalibrationOptions
{
    CalibrationObjective objective = CalibrationObjective::landmarks;
    double fd_step = 1e-3;
    double tolerance = 1e-5; ///< stop when the accepted step is shorter
    int max_iterations = 500;
};

struct CalibrationResult
{
    AlphaVector alpha;
    double objective = 0.0;
    double objective_at_zero = 0.0;
    int iterations = 0;
};

/// Metrics of the face decode(combine(w_src, basis, alpha)), aligned.
MetricVector simulate_metrics(const LatentCode& w_src, const AxisBasis& basis, const AlphaVector& alpha,
                              const Generator& world, const RegionIndexTable& table);

/**
 * Analysis-by-synthesis estimate of alpha over the box [-0.5, 1.5]^6.
 *
 * Projected gradient descent from alpha = 0 with central finite
 * differences, a Barzilai-Borwein trial step and Armijo backtracking. The
 * returned objective never exceeds the objective at zero.
 *
 * Throws Error(calibration_diverged) on a non-finite objective and
 * Error(invalid_data) when the landmark objective has no post face.
 */
CalibrationResult calibrate_alpha(const TrainingCase& c, const Generator& world, const RegionIndexTable& table,
                                  const CalibrationOptions& options = {});

/// Per-target bookkeeping of a training run.
struct TrainingReport
{
    std::size_t n_cases = 0;
    /// Cases left out of each target by the guarded division.
    std::array<std::vector<std::string>, kMetricCount> excluded;
    std::vector<std::vector<double>> mse;
};

/// Below this |m_src| a relative delta is not formed.
inline constexpr double kDeltaEpsilon = 1e-6;

/// (m_post - m_src) / m_src per metric; nullopt where |m_src| < kDeltaEpsilon.
std::array<std::optional<double>, kMetricCount> relative_delta(const MetricVector& m_src, const MetricVector& m_post);

/// m_src * (1 + dm), componentwise.
MetricVector reconstruct_post(const MetricVector& m_src, const std::array<double, kMetricCount>& dm);

/// f_gen: (u, m_src) -> alpha. Throws Error(not_calibrated) if a case lacks alpha_gt.
GbmModel train_approach_a(std::span<const TrainingCase> cases, const GbmConfig& config,
                          TrainingReport* report = nullptr);

/// f_reg: (u, m_src) -> relative delta. Components with tiny m_src are excluded per target.
GbmModel train_approach_b(std::span<const TrainingCase> cases, const GbmConfig& config,
                          TrainingReport* report = nullptr);

/// Clamped f_gen output.
AlphaVector predict_alpha(const GbmModel& model_a, const DoseVector& u, const MetricVector& m_src);

struct PostPrediction
{
    MetricVector metrics;
    LandmarkSet face;
    AlphaVector alpha;
};

PostPrediction predict_post_a(const DoseVector& u, const MetricVector& m_src, const LatentCode& w_src,
                              const AxisBasis& basis, const GbmModel& model_a, const Generator& world,
                              const RegionIndexTable& table);

/// Predicted relative delta and reconstructed post metrics of approach B.
struct DirectPrediction
{
    std::array<double, kMetricCount> delta{};
    MetricVector metrics;
};

DirectPrediction predict_post_b(const DoseVector& u, const MetricVector& m_src, const GbmModel& model_b);

struct InverseOptions
{
    int random_starts = 64;
    std::uint64_t seed = 0;
    /// How many of the best starting points the pattern search refines.
    int refine_starts = 8;
    /// Initial pattern step as a fraction of each muscle's bound.
    double initial_step = 0.25;
    /// Smallest pattern step, in units.
    double min_step = 1e-3;
    /// Extra starting doses (training doses, the session's current dose).
    std::vector<DoseVector> candidates;
};

struct InverseResult
{
    DoseVector dose;
    double residual = 0.0;
    int evaluations = 0;
};

/**
 * Derivative-free minimization of |f_gen(u, m_src) - alpha_target|^2 over
 * 0 <= u <= bounds. Every candidate and seeded random start is evaluated;
 * coordinate pattern search then refines the best few. The result is the
 * best dose seen, ties going to the earliest evaluated.
 */
InverseResult invert_dose(const AlphaVector& alpha_target, const MetricVector& m_src, const GbmModel& model_a,
                          const DoseBounds& bounds, const InverseOptions& options = {});

/// Approach A as persisted: the forward model plus the training doses that
/// seed inversion.
struct ApproachABundle
{
    GbmModel model;
    std::vector<DoseVector> training_doses;
};

} // namespace facedose
