#include "facedose/doseresponse.hpp"

#include "facedose/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace facedose {

std::array<double, kFeatureCount> dose_features(const DoseVector& u, const MetricVector& m_src)
{
    std::array<double, kFeatureCount> f{};
    std::copy(u.units.begin(), u.units.end(), f.begin());
    std::copy(m_src.values.begin(), m_src.values.end(), f.begin() + kMuscleCount);
    return f;
}

MetricVector simulate_metrics(const LatentCode& w_src, const AxisBasis& basis, const AlphaVector& alpha,
                              const Generator& world, const RegionIndexTable& table)
{
    return compute_metrics(align(world.decode(combine(w_src, basis, alpha)), table), table);
}

// ------------------------------------------------------------ calibration

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

AlphaVector to_alpha(const Vec6& v)
{
    AlphaVector a;
    for (int k = 0; k < 6; ++k) a[k] = v[k];
    return a;
}

Vec6 project(Vec6 v)
{
    return v.cwiseMax(kAlphaMin).cwiseMin(kAlphaMax);
}

} // namespace

CalibrationResult calibrate_alpha(const TrainingCase& c, const Generator& world, const RegionIndexTable& table,
                                  const CalibrationOptions& options)
{
    if (!std::all_of(c.m_post.values.begin(), c.m_post.values.end(), [](double v) { return std::isfinite(v); })) {
        throw Error(Errc::invalid_data, "m_post must be finite", "m_post");
    }
    const bool use_landmarks = options.objective == CalibrationObjective::landmarks;
    std::optional<CanonicalLandmarks> post;
    if (use_landmarks) {
        if (!c.post_face) throw Error(Errc::invalid_data, "landmark calibration needs the post face", "post_face");
        post = align(*c.post_face, table);
    }

    auto objective = [&](const Vec6& a) {
        const CanonicalLandmarks face = align(world.decode(combine(c.w_src, c.basis, to_alpha(a))), table);
        double f = 0.0;
        if (use_landmarks) {
            for (std::size_t i = 0; i < kLandmarkCount; ++i) f += (face.points[i] - post->points[i]).squaredNorm();
            f /= static_cast<double>(kLandmarkCount) * post->ipd * post->ipd;
        } else {
            const MetricVector m = compute_metrics(face, table);
            for (std::size_t k = 0; k < kMetricCount; ++k) f += (m[k] - c.m_post[k]) * (m[k] - c.m_post[k]);
        }
        if (!std::isfinite(f)) throw Error(Errc::calibration_diverged, "objective became non-finite");
        return f;
    };
    auto gradient = [&](const Vec6& a) {
        Vec6 g;
        for (int k = 0; k < 6; ++k) {
            Vec6 hi = a, lo = a;
            hi[k] += options.fd_step;
            lo[k] -= options.fd_step;
            g[k] = (objective(hi) - objective(lo)) / (2.0 * options.fd_step);
        }
        return g;
    };

    Vec6 a = Vec6::Zero();
    double f = objective(a);
    CalibrationResult result;
    result.objective_at_zero = f;

    Vec6 g = gradient(a);
    Vec6 a_prev = a, g_prev = g;
    double t = g.norm() > 0 ? 0.1 / g.norm() : 1.0;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        if (it > 0) {
            const Vec6 s = a - a_prev, y = g - g_prev;
            const double sy = s.dot(y);
            t = sy > 0 ? s.squaredNorm() / sy : 2.0 * t;
        }
        bool accepted = false;
        Vec6 next;
        double f_next = f;
        for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
            next = project(a - t * g);
            if ((next - a).lpNorm<Eigen::Infinity>() == 0.0) break;
            f_next = objective(next);
            if (f_next <= f - 1e-4 * g.dot(a - next)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        const double step = (next - a).lpNorm<Eigen::Infinity>();
        a_prev = a;
        g_prev = g;
        a = next;
        f = f_next;
        if (step < options.tolerance) {
            ++it;
            break;
        }
        g = gradient(a);
    }
    result.alpha = to_alpha(a);
    result.objective = f;
    result.iterations = it;
    return result;
}

// ---------------------------------------------------------------- training

std::array<std::optional<double>, kMetricCount> relative_delta(const MetricVector& m_src, const MetricVector& m_post)
{
    std::array<std::optional<double>, kMetricCount> out;
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        if (std::abs(m_src[k]) >= kDeltaEpsilon) out[k] = (m_post[k] - m_src[k]) / m_src[k];
    }
    return out;
}

MetricVector reconstruct_post(const MetricVector& m_src, const std::array<double, kMetricCount>& dm)
{
    MetricVector out;
    for (std::size_t k = 0; k < kMetricCount; ++k) out[k] = m_src[k] * (1.0 + dm[k]);
    return out;
}

namespace {

Eigen::MatrixXd feature_matrix(std::span<const TrainingCase> cases)
{
    Eigen::MatrixXd x(static_cast<Eigen::Index>(cases.size()), static_cast<Eigen::Index>(kFeatureCount));
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto f = dose_features(cases[i].u, cases[i].m_src);
        for (std::size_t j = 0; j < kFeatureCount; ++j) x(i, j) = f[j];
    }
    return x;
}

std::string case_name(const TrainingCase& c)
{
    return c.expression.empty() ? c.patient_id : c.patient_id + "/" + c.expression;
}

} // namespace

GbmModel train_approach_a(std::span<const TrainingCase> cases, const GbmConfig& config, TrainingReport* report)
{
    if (cases.size() < 2) throw Error(Errc::insufficient_data, "approach A needs at least 2 cases");
    Eigen::MatrixXd y(static_cast<Eigen::Index>(cases.size()), static_cast<Eigen::Index>(kRegionCount));
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (!cases[i].alpha_gt) {
            throw Error(Errc::not_calibrated, "case has no calibrated alpha", case_name(cases[i]));
        }
        for (std::size_t k = 0; k < kRegionCount; ++k) y(i, k) = (*cases[i].alpha_gt)[k];
    }
    GbmTrace trace;
    GbmModel model = train_gbm(feature_matrix(cases), y, config, nullptr, report ? &trace : nullptr);
    if (report) {
        *report = TrainingReport{};
        report->n_cases = cases.size();
        report->mse = std::move(trace.mse);
    }
    return model;
}

GbmModel train_approach_b(std::span<const TrainingCase> cases, const GbmConfig& config, TrainingReport* report)
{
    if (cases.size() < 2) throw Error(Errc::insufficient_data, "approach B needs at least 2 cases");
    const auto n = static_cast<Eigen::Index>(cases.size());
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, kMetricCount);
    TargetMask mask = TargetMask::Constant(n, kMetricCount, true);
    TrainingReport local;
    local.n_cases = cases.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto dm = relative_delta(cases[i].m_src, cases[i].m_post);
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            if (dm[k] && std::isfinite(*dm[k])) {
                y(i, k) = *dm[k];
            } else {
                mask(i, k) = false;
                local.excluded[k].push_back(case_name(cases[i]));
            }
        }
    }
    GbmTrace trace;
    GbmModel model = train_gbm(feature_matrix(cases), y, config, &mask, report ? &trace : nullptr);
    if (report) {
        local.mse = std::move(trace.mse);
        *report = std::move(local);
    }
    return model;
}

// --------------------------------------------------------------- inference

AlphaVector predict_alpha(const GbmModel& model_a, const DoseVector& u, const MetricVector& m_src)
{
    if (model_a.n_features() != static_cast<int>(kFeatureCount) ||
        model_a.n_targets() != static_cast<int>(kRegionCount)) {
        throw Error(Errc::shape_mismatch, "model is not an approach A model (28 features, 6 targets)");
    }
    const auto f = dose_features(u, m_src);
    AlphaVector a;
    for (std::size_t k = 0; k < kRegionCount; ++k) a[k] = model_a.predict_target(f, static_cast<int>(k));
    return clamp_alpha(a);
}

PostPrediction predict_post_a(const DoseVector& u, const MetricVector& m_src, const LatentCode& w_src,
                              const AxisBasis& basis, const GbmModel& model_a, const Generator& world,
                              const RegionIndexTable& table)
{
    const AlphaVector alpha = predict_alpha(model_a, u, m_src);
    LandmarkSet face = world.decode(combine(w_src, basis, alpha));
    const MetricVector metrics = compute_metrics(align(face, table), table);
    return {metrics, std::move(face), alpha};
}

DirectPrediction predict_post_b(const DoseVector& u, const MetricVector& m_src, const GbmModel& model_b)
{
    if (model_b.n_features() != static_cast<int>(kFeatureCount) ||
        model_b.n_targets() != static_cast<int>(kMetricCount)) {
        throw Error(Errc::shape_mismatch, "model is not an approach B model (28 features, 6 targets)");
    }
    const std::vector<double> dm = model_b.predict(dose_features(u, m_src));
    DirectPrediction out;
    std::copy(dm.begin(), dm.end(), out.delta.begin());
    out.metrics = reconstruct_post(m_src, out.delta);
    return out;
}

// ----------------------------------------------------------------- inverse

InverseResult invert_dose(const AlphaVector& alpha_target, const MetricVector& m_src, const GbmModel& model_a,
                          const DoseBounds& bounds, const InverseOptions& options)
{
    for (std::size_t j = 0; j < kMuscleCount; ++j) {
        if (!(bounds[j] > 0.0) || !std::isfinite(bounds[j])) {
            throw Error(Errc::invalid_config, "dose bounds must be positive", "bounds[" + std::to_string(j) + "]");
        }
    }
    InverseResult best;
    best.residual = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    auto residual = [&](const DoseVector& u) {
        ++evaluations;
        const AlphaVector a = predict_alpha(model_a, u, m_src);
        double r = 0.0;
        for (std::size_t k = 0; k < kRegionCount; ++k) r += (a[k] - alpha_target[k]) * (a[k] - alpha_target[k]);
        if (r < best.residual) {
            best.residual = r;
            best.dose = u;
        }
        return r;
    };
    auto clip = [&](DoseVector u) {
        for (std::size_t j = 0; j < kMuscleCount; ++j) {
            u[j] = std::isfinite(u[j]) ? std::clamp(u[j], 0.0, bounds[j]) : 0.0;
        }
        return u;
    };

    struct Start
    {
        DoseVector u;
        double r;
    };
    std::vector<Start> starts;
    starts.push_back({DoseVector{}, residual(DoseVector{})});
    for (const DoseVector& c : options.candidates) {
        const DoseVector u = clip(c);
        starts.push_back({u, residual(u)});
    }
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < options.random_starts; ++s) {
        DoseVector u;
        for (std::size_t j = 0; j < kMuscleCount; ++j) u[j] = bounds[j] * unit(rng);
        starts.push_back({u, residual(u)});
    }

    std::stable_sort(starts.begin(), starts.end(), [](const Start& a, const Start& b) { return a.r < b.r; });
    const std::size_t n_refine = std::min<std::size_t>(starts.size(), static_cast<std::size_t>(options.refine_starts));
    for (std::size_t s = 0; s < n_refine && best.residual > 0.0; ++s) {
        DoseVector u = starts[s].u;
        double r = starts[s].r;
        std::array<double, kMuscleCount> step{};
        for (std::size_t j = 0; j < kMuscleCount; ++j) step[j] = options.initial_step * bounds[j];
        while (r > 0.0 && *std::max_element(step.begin(), step.end()) >= options.min_step) {
            bool improved = false;
            for (std::size_t j = 0; j < kMuscleCount && r > 0.0; ++j) {
                if (step[j] < options.min_step) continue;
                for (double dir : {+1.0, -1.0}) {
                    DoseVector trial = u;
                    trial[j] = std::clamp(u[j] + dir * step[j], 0.0, bounds[j]);
                    if (trial[j] == u[j]) continue;
                    const double rt = residual(trial);
                    if (rt < r) {
                        u = trial;
                        r = rt;
                        improved = true;
                        break;
                    }
                }
            }
            if (!improved) {
                for (double& h : step) h *= 0.5;
            }
        }
    }
    best.evaluations = evaluations;
    return best;
}

} // namespace facedose
