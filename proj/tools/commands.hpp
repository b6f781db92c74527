#pragma once

#include "run_context.hpp"

#include <optional>
#include <string>

namespace facedose::cli {

struct CohortGenArgs
{
    int patients = 46;
    int per_patient = 8;
    double noise = 0.0;
    double asymmetry = 1.0;
    double ratio = 0.8;
    std::string out = "cohort";
};

struct IngestArgs
{
    std::string input;
    std::string out = "ingested";
};

struct MetricsArgs
{
    std::string record;
    std::string out = "metrics";
};

struct AxesArgs
{
    std::string record;
    std::string expression = "neutral";
    std::string out = "axes";
};

struct CalibrateArgs
{
    std::string train_dir;
    std::string objective = "landmarks";
    std::string out = "cases";
};

struct TrainArgs
{
    std::string approach;
    std::string cases;     ///< calibrated cases from calibrate
    std::string train_dir; ///< or raw records
    std::string feedback;  ///< service data directory whose log refines approach A
    int n_trees = 200;
    int max_depth = 3;
    double learning_rate = 0.05;
    int min_samples_leaf = 2;
    double subsample = 1.0;
    std::string out = "models";
};

struct EvaluateArgs
{
    std::string train_dir;
    std::string test_dir;
    std::string model_a;
    std::string model_b;
    int control_repeats = 0;
    std::string out = "reports";
};

struct SimulateArgs
{
    std::string model_a;
    std::string record;
    std::string expression = "neutral";
    std::string dose;
    std::string out = "simulations";
};

struct InvertArgs
{
    std::string model_a;
    std::string record;
    std::string expression = "neutral";
    std::string alpha;
    int starts = 64;
    std::string out = "inversions";
};

struct ServeArgs
{
    std::string model;
    std::string bind;
};

int cohort_gen(const Common& c, const CohortGenArgs& a);
int ingest_records(const Common& c, const IngestArgs& a);
int metrics(const Common& c, const MetricsArgs& a);
int axes(const Common& c, const AxesArgs& a);
int calibrate(const Common& c, const CalibrateArgs& a);
int train(const Common& c, const TrainArgs& a);
int evaluate(const Common& c, const EvaluateArgs& a);
int simulate(const Common& c, const SimulateArgs& a);
int invert(const Common& c, const InvertArgs& a);
int serve(const Common& c, const ServeArgs& a);

} // namespace facedose::cli
