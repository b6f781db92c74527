#include "cohort_fixture.hpp"
#include "test_faces.hpp"

#include <facedose/error.hpp>
#include <facedose/evaluation.hpp>

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <regex>
#include <sstream>

using namespace facedose;
using namespace facedose::testing;

namespace {

std::vector<PatientRecord> pre_only(std::span<const PatientRecord> records)
{
    std::vector<PatientRecord> out;
    for (const PatientRecord& r : records) out.push_back(without_post_sessions(r));
    return out;
}

EvalReport b_only_report()
{
    const CohortFixture& f = shared_cohort();
    const auto pre = pre_only(f.split.test);
    const auto inputs = build_test_inputs(pre, f.world(), table(), f.masks);
    const auto outcomes = build_test_outcomes(f.split.test, table());
    return evaluate_models(nullptr, &f.model_b, inputs, outcomes, f.world(), table());
}

} // namespace

TEST(Score, PerfectPrediction)
{
    const std::vector<double> t{0.1, -0.4, 0.3, 0.9};
    const MetricScore s = score_metric(t, t);
    EXPECT_EQ(s.mae, 0.0);
    EXPECT_EQ(s.r2, 1.0);
    EXPECT_NEAR(s.pearson, 1.0, 1e-15);
}

TEST(Score, MeanPredictorHasZeroR2)
{
    const std::vector<double> t{1.0, 2.0, 4.0, 5.0};
    const std::vector<double> p(4, 3.0);
    EXPECT_EQ(score_metric(p, t).r2, 0.0);
}

TEST(Score, HandComputedExample)
{
    const std::vector<double> p{1, 2, 3}, t{1, 2, 4};
    const MetricScore s = score_metric(p, t);
    EXPECT_DOUBLE_EQ(s.mae, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.r2, 1.0 - 1.0 / (14.0 / 3.0));
    // cov = 3, var(p) = 2, var(t) = 14/3 (sums of squares about the means)
    EXPECT_DOUBLE_EQ(s.pearson, 3.0 / std::sqrt(2.0 * 14.0 / 3.0));
    EXPECT_EQ(s.n, 3u);
}

TEST(Score, DegenerateTruthIsFlagged)
{
    const std::vector<double> t(3, 0.5);
    const std::vector<double> p{0.4, 0.5, 0.6};
    const MetricScore s = score_metric(p, t);
    EXPECT_TRUE(std::isnan(s.pearson));
    EXPECT_FALSE(s.pearson_defined());
    EXPECT_TRUE(std::isinf(s.r2) && s.r2 < 0);
    EXPECT_EQ(score_metric(t, t).r2, 0.0);
}

TEST(Score, ReorderingInvariant)
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    std::vector<MetricArray> p(12), t(12);
    for (std::size_t i = 0; i < 12; ++i) {
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            t[i][k] = n(rng);
            p[i][k] = t[i][k] + 0.3 * n(rng);
        }
    }
    const auto a = score(p, t);
    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<MetricArray> p2, t2;
    for (std::size_t i : perm) {
        p2.push_back(p[i]);
        t2.push_back(t[i]);
    }
    const auto b = score(p2, t2);
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        EXPECT_NEAR(a[k].mae, b[k].mae, 1e-15);
        EXPECT_NEAR(a[k].r2, b[k].r2, 1e-13);
        EXPECT_NEAR(a[k].pearson, b[k].pearson, 1e-13);
    }
}

TEST(Score, Errors)
{
    const std::vector<double> three{1, 2, 3}, two{1, 2}, one{1};
    EXPECT_THROW((void)score_metric(three, two), Error);
    EXPECT_THROW((void)score_metric(one, one), Error);
}

TEST(Pipeline, TestInputsRefusePostSessions)
{
    const CohortFixture& f = shared_cohort();
    try {
        (void)build_test_inputs(f.split.test, f.world(), table(), f.masks);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_data);
    }
}

TEST(Pipeline, TrainingCasesPairPreAndPost)
{
    const CohortFixture& f = shared_cohort();
    EXPECT_EQ(f.cases.size(), 37u * 8u);
    for (const TrainingCase& c : f.cases) {
        EXPECT_TRUE(c.alpha_gt.has_value());
        EXPECT_TRUE(c.post_face.has_value());
    }
}

TEST(Pipeline, CalibratedAlphaTracksTruth)
{
    const CohortFixture& f = shared_cohort();
    int close = 0;
    for (const TrainingCase& c : f.cases) {
        const AlphaVector& t = f.truth_of(c.patient_id).alpha;
        double worst = 0.0;
        for (std::size_t k = 0; k < kRegionCount; ++k) worst = std::max(worst, std::abs((*c.alpha_gt)[k] - t[k]));
        close += worst <= 0.05;
    }
    EXPECT_GE(close, static_cast<int>(0.95 * f.cases.size()));
}

TEST(Report, MissingApproachIsMarked)
{
    const EvalReport r = b_only_report();
    EXPECT_FALSE(r.a.has_value());
    ASSERT_TRUE(r.b.has_value());
    EXPECT_EQ(r.n_test, 9u * 8u);
    const std::string table_text = render_table(r);
    EXPECT_NE(table_text.find("MAE A n/a / B "), std::string::npos);
    const nlohmann::json j = nlohmann::json::parse(report_json(r));
    EXPECT_TRUE(j["approaches"]["A"].is_null());
    EXPECT_TRUE(j["approaches"]["B"].is_object());
}

TEST(Report, TableLayout)
{
    const EvalReport r = b_only_report();
    std::istringstream in(render_table(r));
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    ASSERT_EQ(rows.size(), 2u + kMetricCount);
    const std::regex row(
        R"(^[A-Za-z. -]+ \| MAE A (n/a|[0-9.]+) / B [0-9.]+ \| R² A (n/a|-?[0-9.]+) / B -?[0-9.]+ \| r A (n/a|-?[0-9.]+) / B -?[0-9.]+ \| MAE×100 A (n/a|[0-9.]+) / B [0-9.]+$)");
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        EXPECT_TRUE(std::regex_match(rows[2 + k], row)) << rows[2 + k];
        EXPECT_EQ(rows[2 + k].rfind(std::string(metric_label(Metric(k))) + " |", 0), 0u);
    }
    EXPECT_EQ(rows[2].substr(0, 15), "Eyebrows Asym. ");
}

TEST(Report, Deterministic)
{
    const EvalReport a = b_only_report();
    const EvalReport b = b_only_report();
    EXPECT_EQ(report_json(a), report_json(b));
    EXPECT_EQ(render_table(a), render_table(b));
    EXPECT_EQ(predictions_csv(a), predictions_csv(b));
}

TEST(Report, PredictedDeltaUsesSourceMetrics)
{
    MetricVector src, post;
    src.values = {0.2, 0.1, 0.0, 0.5, 2.0, 0.1};
    post.values = {0.1, 0.1, 0.3, 0.25, 1.0, 0.05};
    const auto d = predicted_delta(src, post);
    EXPECT_DOUBLE_EQ(*d[0], -0.5);
    EXPECT_EQ(*d[1], 0.0);
    EXPECT_FALSE(d[2].has_value());
    EXPECT_FALSE(predicted_delta(src, std::nullopt)[0].has_value());
}

TEST(Report, ConfigHashTracksSettings)
{
    const CohortFixture& f = shared_cohort();
    EvalConfig a, b;
    b.gbm.n_trees = 150;
    EXPECT_EQ(config_hash(a, f.world()), config_hash(a, f.world()));
    EXPECT_NE(config_hash(a, f.world()), config_hash(b, f.world()));
}
