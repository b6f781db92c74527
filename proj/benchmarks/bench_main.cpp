// Hot paths of the planning loop: metrics, decode/encode, boosting and the
// inverse search that every slider commit runs.
#include <facedose/cohort.hpp>
#include <facedose/doseresponse.hpp>
#include <facedose/evaluation.hpp>
#include <facedose/geometry.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace facedose;

namespace {

const SyntheticWorld& world()
{
    static const SyntheticWorld w = SyntheticWorld::create({});
    return w;
}

LatentCode random_code(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.2);
    LatentCode w = LatentCode::zeros(world().latent_shape());
    for (Eigen::Index i = 0; i < w.flat().size(); ++i) w.flat()[i] = n(rng);
    return w;
}

struct Trained
{
    std::vector<TrainingCase> cases;
    GbmModel model_a;
};

const Trained& trained()
{
    static const Trained t = [] {
        CohortConfig cc;
        cc.n_patients = 20;
        cc.images_per_patient = 2;
        cc.seed = 3;
        const Cohort cohort = generate_cohort(cc);
        const auto& table = RegionIndexTable::standard();
        std::vector<TrainingCase> cases =
            build_training_cases(cohort.records, cohort.world, table, default_roi_masks(table));
        calibrate_cases(cases, cohort.world, table);
        GbmModel a = train_approach_a(cases, GbmConfig{});
        return Trained{std::move(cases), std::move(a)};
    }();
    return t;
}

void BM_ComputeMetrics(benchmark::State& state)
{
    const auto& table = RegionIndexTable::standard();
    const CanonicalLandmarks face = align(world().decode(random_code(1)), table);
    for (auto _ : state) benchmark::DoNotOptimize(compute_metrics(face, table));
}
BENCHMARK(BM_ComputeMetrics);

void BM_Align(benchmark::State& state)
{
    const auto& table = RegionIndexTable::standard();
    const LandmarkSet face = world().decode(random_code(2));
    for (auto _ : state) benchmark::DoNotOptimize(align(face, table));
}
BENCHMARK(BM_Align);

void BM_DecodeEncode(benchmark::State& state)
{
    const LatentCode w = random_code(3);
    for (auto _ : state) benchmark::DoNotOptimize(world().encode(world().decode(w)));
}
BENCHMARK(BM_DecodeEncode);

void BM_TrainGbm(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd x(n, 28), y(n, 6);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 28; ++j) x(i, j) = u(rng);
        for (int k = 0; k < 6; ++k) y(i, k) = x(i, k) * x(i, k + 6) + 0.1 * u(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(train_gbm(x, y, GbmConfig{}));
}
BENCHMARK(BM_TrainGbm)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_PredictAlpha(benchmark::State& state)
{
    const Trained& t = trained();
    for (auto _ : state) benchmark::DoNotOptimize(predict_alpha(t.model_a, t.cases[0].u, t.cases[0].m_src));
}
BENCHMARK(BM_PredictAlpha);

void BM_InvertDose(benchmark::State& state)
{
    const Trained& t = trained();
    const AlphaVector target = 0.9 * predict_alpha(t.model_a, t.cases[1].u, t.cases[0].m_src);
    for (auto _ : state) {
        benchmark::DoNotOptimize(invert_dose(target, t.cases[0].m_src, t.model_a, default_dose_bounds()));
    }
}
BENCHMARK(BM_InvertDose)->Unit(benchmark::kMillisecond);

void BM_CalibrateAlpha(benchmark::State& state)
{
    const Trained& t = trained();
    const auto& table = RegionIndexTable::standard();
    for (auto _ : state) benchmark::DoNotOptimize(calibrate_alpha(t.cases[0], world(), table));
}
BENCHMARK(BM_CalibrateAlpha)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
