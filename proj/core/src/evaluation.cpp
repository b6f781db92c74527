#include "facedose/evaluation.hpp"

#include "facedose/error.hpp"
#include "facedose/hashing.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace facedose {

// ---------------------------------------------------------------- scoring

bool MetricScore::pearson_defined() const
{
    return !std::isnan(pearson);
}

bool MetricScore::r2_defined() const
{
    return std::isfinite(r2);
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw Error(Errc::shape_mismatch, "pearson needs equal lengths");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MetricScore score_metric(std::span<const double> pred, std::span<const double> truth)
{
    if (pred.size() != truth.size()) throw Error(Errc::shape_mismatch, "prediction and truth lengths differ");
    if (truth.size() < 2) throw Error(Errc::insufficient_data, "scoring needs at least 2 pairs");
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!std::isfinite(pred[i]) || !std::isfinite(truth[i])) {
            throw Error(Errc::invalid_data, "scores need finite values", "[" + std::to_string(i) + "]");
        }
    }
    const double n = static_cast<double>(truth.size());
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
    double abs_err = 0.0, sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        abs_err += std::abs(pred[i] - truth[i]);
        sse += (pred[i] - truth[i]) * (pred[i] - truth[i]);
        sst += (truth[i] - mean) * (truth[i] - mean);
    }
    MetricScore s;
    s.n = truth.size();
    s.mae = abs_err / n;
    if (sst > 0.0) {
        s.r2 = 1.0 - sse / sst;
    } else {
        s.r2 = sse == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    s.pearson = pearson(pred, truth);
    return s;
}

std::array<MetricScore, kMetricCount> score(std::span<const MetricArray> pred, std::span<const MetricArray> truth)
{
    if (pred.size() != truth.size()) throw Error(Errc::shape_mismatch, "prediction and truth lengths differ");
    std::array<MetricScore, kMetricCount> out;
    std::vector<double> p(pred.size()), t(truth.size());
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            p[i] = pred[i][k];
            t[i] = truth[i][k];
        }
        out[k] = score_metric(p, t);
    }
    return out;
}

// ----------------------------------------------------------- pipeline glue

namespace {

struct ExpressionSessions
{
    std::string expression;
    const Session* pre = nullptr;
    const Session* post = nullptr;
};

/// Latest pre and post session per expression, in first-appearance order.
std::vector<ExpressionSessions> group_sessions(const PatientRecord& r)
{
    std::vector<ExpressionSessions> out;
    for (const Session& s : r.sessions) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.expression == s.expression; });
        if (it == out.end()) {
            out.push_back({s.expression});
            it = std::prev(out.end());
        }
        const Session*& slot = s.phase == Phase::pre ? it->pre : it->post;
        if (!slot || s.timestamp > slot->timestamp) slot = &s;
    }
    return out;
}

} // namespace

SourceState source_state(const LandmarkSet& photo, const std::string& patient_id, const Generator& world,
                         const RegionIndexTable& table, const RoiSet& masks)
{
    const CanonicalLandmarks aligned = align(photo, table);
    const LandmarkSet src = aligned.to_landmark_set();
    const SymmetricTarget tgt = symmetric_target(src, world, table);
    return {world.encode(src), discover_axes(src, tgt.face, masks, world, patient_id), compute_metrics(aligned, table)};
}

std::vector<TrainingCase> build_training_cases(std::span<const PatientRecord> records, const Generator& world,
                                               const RegionIndexTable& table, const RoiSet& masks)
{
    std::vector<TrainingCase> cases;
    for (const PatientRecord& r : records) {
        std::size_t found = 0;
        for (const ExpressionSessions& e : group_sessions(r)) {
            if (!e.pre || !e.post) continue;
            SourceState s = source_state(e.pre->landmarks, r.patient_id, world, table, masks);
            const CanonicalLandmarks post = align(e.post->landmarks, table);
            TrainingCase c;
            c.patient_id = r.patient_id;
            c.expression = e.expression;
            c.w_src = std::move(s.w_src);
            c.basis = std::move(s.basis);
            c.m_src = s.m_src;
            c.m_post = compute_metrics(post, table);
            c.u = r.dose;
            c.post_face = post.to_landmark_set();
            cases.push_back(std::move(c));
            ++found;
        }
        if (found == 0) {
            throw Error(Errc::insufficient_data, "training patient has no pre/post pair", r.patient_id);
        }
    }
    return cases;
}

std::vector<TestInput> build_test_inputs(std::span<const PatientRecord> pre_only, const Generator& world,
                                         const RegionIndexTable& table, const RoiSet& masks)
{
    std::vector<TestInput> out;
    for (const PatientRecord& r : pre_only) {
        for (const ExpressionSessions& e : group_sessions(r)) {
            if (e.post) {
                throw Error(Errc::invalid_data, "test inputs must not carry post-treatment sessions", r.patient_id);
            }
            if (!e.pre) continue;
            SourceState s = source_state(e.pre->landmarks, r.patient_id, world, table, masks);
            out.push_back({r.patient_id, e.expression, std::move(s.w_src), std::move(s.basis), s.m_src, r.dose});
        }
    }
    return out;
}

std::vector<TestOutcome> build_test_outcomes(std::span<const PatientRecord> records, const RegionIndexTable& table)
{
    std::vector<TestOutcome> out;
    for (const PatientRecord& r : records) {
        for (const ExpressionSessions& e : group_sessions(r)) {
            if (!e.pre) continue;
            if (!e.post) {
                throw Error(Errc::insufficient_data, "test case has no post session to score against",
                            r.patient_id + "/" + e.expression);
            }
            out.push_back({r.patient_id, e.expression, compute_metrics(align(e.post->landmarks, table), table)});
        }
    }
    return out;
}

void calibrate_cases(std::vector<TrainingCase>& cases, const Generator& world, const RegionIndexTable& table,
                     const CalibrationOptions& options)
{
    for (TrainingCase& c : cases) c.alpha_gt = calibrate_alpha(c, world, table, options).alpha;
}

// ----------------------------------------------------------------- reports

std::array<std::optional<double>, kMetricCount> predicted_delta(const MetricVector& m_src,
                                                                const std::optional<MetricVector>& post)
{
    if (!post) return {};
    return relative_delta(m_src, *post);
}

namespace {

std::optional<std::array<MetricScore, kMetricCount>> score_approach(const std::vector<CasePrediction>& cases,
                                                                    bool approach_a)
{
    std::array<MetricScore, kMetricCount> out;
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        std::vector<double> p, t;
        for (const CasePrediction& c : cases) {
            const auto dm = predicted_delta(c.m_src, approach_a ? c.post_a : c.post_b);
            if (dm[k] && c.true_dm[k]) {
                p.push_back(*dm[k]);
                t.push_back(*c.true_dm[k]);
            }
        }
        if (t.size() < 2) return std::nullopt;
        out[k] = score_metric(p, t);
    }
    return out;
}

void check_pairing(std::span<const TestInput> inputs, std::span<const TestOutcome> outcomes)
{
    if (inputs.size() != outcomes.size()) throw Error(Errc::shape_mismatch, "test inputs and outcomes differ in count");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].patient_id != outcomes[i].patient_id || inputs[i].expression != outcomes[i].expression) {
            throw Error(Errc::invalid_data, "test inputs and outcomes are not aligned", "[" + std::to_string(i) + "]");
        }
    }
}

} // namespace

EvalReport evaluate_models(const GbmModel* model_a, const GbmModel* model_b, std::span<const TestInput> inputs,
                           std::span<const TestOutcome> outcomes, const Generator& world,
                           const RegionIndexTable& table)
{
    check_pairing(inputs, outcomes);
    EvalReport report;
    report.n_test = inputs.size();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const TestInput& in = inputs[i];
        CasePrediction c;
        c.patient_id = in.patient_id;
        c.expression = in.expression;
        c.m_src = in.m_src;
        c.m_post = outcomes[i].m_post;
        c.true_dm = relative_delta(in.m_src, outcomes[i].m_post);
        if (model_a) c.post_a = predict_post_a(in.u, in.m_src, in.w_src, in.basis, *model_a, world, table).metrics;
        if (model_b) c.post_b = predict_post_b(in.u, in.m_src, *model_b).metrics;
        report.cases.push_back(std::move(c));
    }
    if (model_a) report.a = score_approach(report.cases, true);
    if (model_b) report.b = score_approach(report.cases, false);
    return report;
}

std::pair<MetricArray, MetricArray> shuffled_dose_control(std::span<const TrainingCase> calibrated,
                                                          std::span<const TestInput> inputs,
                                                          std::span<const TestOutcome> outcomes,
                                                          const GbmConfig& gbm, int repeats, std::uint64_t seed,
                                                          const Generator& world, const RegionIndexTable& table)
{
    if (repeats < 1) throw Error(Errc::invalid_config, "control needs at least one repeat", "repeats");
    std::vector<std::string> patients;
    std::map<std::string, DoseVector> dose_of;
    for (const TrainingCase& c : calibrated) {
        if (dose_of.emplace(c.patient_id, c.u).second) patients.push_back(c.patient_id);
    }
    MetricArray sum_a{}, sum_b{};
    for (int rep = 0; rep < repeats; ++rep) {
        std::vector<std::size_t> perm(patients.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(rep));
        for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);
        std::map<std::string, DoseVector> shuffled;
        for (std::size_t i = 0; i < patients.size(); ++i) shuffled[patients[i]] = dose_of[patients[perm[i]]];

        std::vector<TrainingCase> cases(calibrated.begin(), calibrated.end());
        for (TrainingCase& c : cases) c.u = shuffled[c.patient_id];
        const GbmModel a = train_approach_a(cases, gbm);
        const GbmModel b = train_approach_b(cases, gbm);
        const EvalReport r = evaluate_models(&a, &b, inputs, outcomes, world, table);
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            const double ra = r.a ? (*r.a)[k].pearson : std::numeric_limits<double>::quiet_NaN();
            const double rb = r.b ? (*r.b)[k].pearson : std::numeric_limits<double>::quiet_NaN();
            // A constant prediction carries no dose signal at all.
            sum_a[k] += std::isnan(ra) ? 0.0 : ra;
            sum_b[k] += std::isnan(rb) ? 0.0 : rb;
        }
    }
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        sum_a[k] /= repeats;
        sum_b[k] /= repeats;
    }
    return {sum_a, sum_b};
}

std::string config_hash(const EvalConfig& c, const Generator& world)
{
    const nlohmann::json j = {
        {"gbm",
         {{"n_trees", c.gbm.n_trees},
          {"max_depth", c.gbm.max_depth},
          {"learning_rate", c.gbm.learning_rate},
          {"min_samples_leaf", c.gbm.min_samples_leaf},
          {"subsample", c.gbm.subsample},
          {"seed", c.gbm.seed}}},
        {"calibration",
         {{"objective", c.calibration.objective == CalibrationObjective::landmarks ? "landmarks" : "metrics"},
          {"fd_step", c.calibration.fd_step},
          {"tolerance", c.calibration.tolerance},
          {"max_iterations", c.calibration.max_iterations}}},
        {"seed", c.seed},
        {"control_repeats", c.control_repeats},
        {"world", world.version_hash()}};
    return sha256_hex(j.dump());
}

namespace {

std::int64_t latest_timestamp(std::span<const PatientRecord> a, std::span<const PatientRecord> b)
{
    std::int64_t t = 0;
    for (auto span : {a, b})
        for (const PatientRecord& r : span)
            for (const Session& s : r.sessions) t = std::max(t, s.timestamp);
    return t;
}

} // namespace

EvalReport run_comparison(std::span<const PatientRecord> train, std::span<const PatientRecord> test,
                          const EvalConfig& config, const Generator& world, const RegionIndexTable& table,
                          const RoiSet& masks)
{
    for (const PatientRecord& t : test) {
        for (const PatientRecord& r : train) {
            if (r.patient_id == t.patient_id) {
                throw Error(Errc::invalid_data, "patient appears in both splits", t.patient_id);
            }
        }
    }
    std::vector<TrainingCase> cases = build_training_cases(train, world, table, masks);
    calibrate_cases(cases, world, table, config.calibration);
    const GbmModel a = train_approach_a(cases, config.gbm);
    const GbmModel b = train_approach_b(cases, config.gbm);

    std::vector<PatientRecord> pre_only;
    for (const PatientRecord& r : test) pre_only.push_back(without_post_sessions(r));
    const std::vector<TestInput> inputs = build_test_inputs(pre_only, world, table, masks);
    const std::vector<TestOutcome> outcomes = build_test_outcomes(test, table);

    EvalReport report = evaluate_models(&a, &b, inputs, outcomes, world, table);
    report.n_train_cases = cases.size();
    report.config_hash = config_hash(config, world);
    report.timestamp = latest_timestamp(train, test);
    if (config.control_repeats > 0) {
        auto [ca, cb] = shuffled_dose_control(cases, inputs, outcomes, config.gbm, config.control_repeats,
                                              config.seed, world, table);
        report.control_a = ca;
        report.control_b = cb;
    }
    return report;
}

EvalReport evaluate_trained(const GbmModel* model_a, const GbmModel* model_b, std::span<const PatientRecord> test,
                            const EvalConfig& config, const Generator& world, const RegionIndexTable& table,
                            const RoiSet& masks)
{
    std::vector<PatientRecord> pre_only;
    for (const PatientRecord& r : test) pre_only.push_back(without_post_sessions(r));
    const std::vector<TestInput> inputs = build_test_inputs(pre_only, world, table, masks);
    const std::vector<TestOutcome> outcomes = build_test_outcomes(test, table);
    EvalReport report = evaluate_models(model_a, model_b, inputs, outcomes, world, table);
    report.config_hash = config_hash(config, world);
    report.timestamp = latest_timestamp({}, test);
    return report;
}

// --------------------------------------------------------------- rendering

namespace {

std::string stat(const std::optional<std::array<MetricScore, kMetricCount>>& s, std::size_t k, int which)
{
    if (!s) return "n/a";
    const MetricScore& m = (*s)[k];
    double v = 0.0;
    switch (which) {
    case 0: return fmt::format("{:.4f}", m.mae);
    case 1: v = m.r2; break;
    case 2: v = m.pearson; break;
    default: return fmt::format("{:.2f}", 100.0 * m.mae);
    }
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    return fmt::format("{:.2f}", v);
}

nlohmann::json stat_json(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json scores_json(const std::optional<std::array<MetricScore, kMetricCount>>& s)
{
    if (!s) return nullptr;
    nlohmann::json out = nlohmann::json::object();
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        const MetricScore& m = (*s)[k];
        out[std::string(metric_key(static_cast<Metric>(k)))] = {
            {"mae", m.mae},
            {"mae_x100", 100.0 * m.mae},
            {"r2", stat_json(m.r2)},
            {"r2_flag", m.r2_defined() ? "ok" : "-inf"},
            {"pearson", stat_json(m.pearson)},
            {"pearson_flag", m.pearson_defined() ? "ok" : "nan"},
            {"n", m.n}};
    }
    return out;
}

nlohmann::json control_json(const std::optional<MetricArray>& c)
{
    if (!c) return nullptr;
    nlohmann::json out = nlohmann::json::object();
    for (std::size_t k = 0; k < kMetricCount; ++k) out[std::string(metric_key(static_cast<Metric>(k)))] = (*c)[k];
    return out;
}

std::string csv_value(const std::optional<double>& v)
{
    return v ? fmt::format("{:.17g}", *v) : "";
}

} // namespace

std::string render_table(const EvalReport& r)
{
    std::string out = fmt::format("Performance comparison on held-out patients (n_test = {}, relative change dm)\n",
                                  r.n_test);
    out += "Metric (dm) | MAE A / B | R² A / B | r A / B | MAE×100 A / B\n";
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        out += fmt::format("{} | MAE A {} / B {} | R² A {} / B {} | r A {} / B {} | MAE×100 A {} / B {}\n",
                           metric_label(static_cast<Metric>(k)), stat(r.a, k, 0), stat(r.b, k, 0), stat(r.a, k, 1),
                           stat(r.b, k, 1), stat(r.a, k, 2), stat(r.b, k, 2), stat(r.a, k, 3), stat(r.b, k, 3));
    }
    return out;
}

std::string report_json(const EvalReport& r)
{
    const nlohmann::json j = {{"schema", "facedose.report/1"},
                              {"n_train_cases", r.n_train_cases},
                              {"n_test", r.n_test},
                              {"config_hash", r.config_hash},
                              {"timestamp", r.timestamp},
                              {"approaches", {{"A", scores_json(r.a)}, {"B", scores_json(r.b)}}},
                              {"shuffled_dose_control", {{"A", control_json(r.control_a)}, {"B", control_json(r.control_b)}}}};
    return j.dump(1) + "\n";
}

std::string predictions_csv(const EvalReport& r)
{
    std::string out = "patient_id,expression,metric,m_src,m_post,true_dm,post_a,dm_a,post_b,dm_b\n";
    for (const CasePrediction& c : r.cases) {
        const auto dm_a = predicted_delta(c.m_src, c.post_a);
        const auto dm_b = predicted_delta(c.m_src, c.post_b);
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            out += fmt::format("{},{},{},{:.17g},{:.17g},{},{},{},{},{}\n", c.patient_id, c.expression,
                               metric_key(static_cast<Metric>(k)), c.m_src[k], c.m_post[k], csv_value(c.true_dm[k]),
                               c.post_a ? fmt::format("{:.17g}", (*c.post_a)[k]) : "", csv_value(dm_a[k]),
                               c.post_b ? fmt::format("{:.17g}", (*c.post_b)[k]) : "", csv_value(dm_b[k]));
        }
    }
    return out;
}

} // namespace facedose
