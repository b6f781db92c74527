#include "commands.hpp"

#include <facedose/error.hpp>

#include <CLI11.hpp>

#include <functional>
#include <iostream>

using namespace facedose::cli;

int main(int argc, char** argv)
{
    CLI::App app{"facedose: dose-response planning on a synthetic landmark face world"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--data-dir", common.data_dir, "Directory every artifact is written to")->capture_default_str();
    app.add_option("--world", common.world, "World file (default <data-dir>/cohort/world.json)");
    app.add_option("--seed", common.seed, "Seed for generation, splits, boosting and search")->capture_default_str();

    std::function<int()> run;

    CohortGenArgs cg;
    auto* s = app.add_subcommand("cohort-gen", "Generate a synthetic cohort, its 80/20 split and sealed truth");
    s->add_option("--patients", cg.patients)->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--per-patient", cg.per_patient, "Expressions photographed per patient")
        ->capture_default_str()
        ->check(CLI::Range(1, 8));
    s->add_option("--noise", cg.noise, "Landmark noise sigma in pixels")->capture_default_str();
    s->add_option("--asymmetry", cg.asymmetry, "Droop amplitude multiplier")->capture_default_str();
    s->add_option("--ratio", cg.ratio, "Training share of patients")->capture_default_str();
    s->add_option("--out", cg.out, "Output directory under --data-dir")->capture_default_str();
    s->callback([&] { run = [&] { return cohort_gen(common, cg); }; });

    IngestArgs ig;
    s = app.add_subcommand("ingest", "Validate record files and copy them into the data directory");
    s->add_option("--input", ig.input, "Record file or directory")->required()->check(CLI::ExistingPath);
    s->add_option("--out", ig.out)->capture_default_str();
    s->callback([&] { run = [&] { return ingest_records(common, ig); }; });

    MetricsArgs mt;
    s = app.add_subcommand("metrics", "Six asymmetry metrics of every session of a record");
    s->add_option("--record", mt.record)->required()->check(CLI::ExistingFile);
    s->add_option("--out", mt.out)->capture_default_str();
    s->callback([&] { run = [&] { return metrics(common, mt); }; });

    AxesArgs ax;
    s = app.add_subcommand("axes", "Discover the six correction axes of a patient photo");
    s->add_option("--record", ax.record)->required()->check(CLI::ExistingFile);
    s->add_option("--expression", ax.expression)->capture_default_str();
    s->add_option("--out", ax.out)->capture_default_str();
    s->callback([&] { run = [&] { return axes(common, ax); }; });

    CalibrateArgs cb;
    s = app.add_subcommand("calibrate", "Estimate alpha for every training case by analysis-by-synthesis");
    s->add_option("--train-dir", cb.train_dir)->required()->check(CLI::ExistingDirectory);
    s->add_option("--objective", cb.objective, "landmarks or metrics")
        ->capture_default_str()
        ->check(CLI::IsMember({"landmarks", "metrics"}));
    s->add_option("--out", cb.out)->capture_default_str();
    s->callback([&] { run = [&] { return calibrate(common, cb); }; });

    TrainArgs tr;
    s = app.add_subcommand("train", "Train approach A (dose -> alpha) or B (dose -> relative delta)");
    s->add_option("--approach", tr.approach)->required()->check(CLI::IsMember({"a", "b"}));
    s->add_option("--cases", tr.cases, "Calibrated cases from calibrate")->check(CLI::ExistingDirectory);
    s->add_option("--train-dir", tr.train_dir, "Raw training records")->check(CLI::ExistingDirectory);
    s->add_option("--feedback", tr.feedback, "Service data directory whose accepted feedback joins training")
        ->check(CLI::ExistingDirectory);
    s->add_option("--n-trees", tr.n_trees)->capture_default_str();
    s->add_option("--max-depth", tr.max_depth)->capture_default_str();
    s->add_option("--learning-rate", tr.learning_rate)->capture_default_str();
    s->add_option("--min-samples-leaf", tr.min_samples_leaf)->capture_default_str();
    s->add_option("--subsample", tr.subsample)->capture_default_str();
    s->add_option("--out", tr.out)->capture_default_str();
    s->callback([&] { run = [&] { return train(common, tr); }; });

    EvaluateArgs ev;
    s = app.add_subcommand("evaluate", "Score approaches A and B on held-out patients");
    s->add_option("--train-dir", ev.train_dir)->check(CLI::ExistingDirectory);
    s->add_option("--test-dir", ev.test_dir)->required()->check(CLI::ExistingDirectory);
    s->add_option("--model-a", ev.model_a, "Trained approach A bundle")->check(CLI::ExistingFile);
    s->add_option("--model-b", ev.model_b, "Trained approach B model")->check(CLI::ExistingFile);
    s->add_option("--control-repeats", ev.control_repeats, "Shuffled-dose control retrainings")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    s->add_option("--out", ev.out)->capture_default_str();
    s->callback([&] { run = [&] { return evaluate(common, ev); }; });

    SimulateArgs sm;
    s = app.add_subcommand("simulate", "Forward approach A: predicted alpha and post metrics for a dose");
    s->add_option("--model-a", sm.model_a)->required()->check(CLI::ExistingFile);
    s->add_option("--record", sm.record)->required()->check(CLI::ExistingFile);
    s->add_option("--expression", sm.expression)->capture_default_str();
    s->add_option("--dose", sm.dose, "22 comma-separated unit counts")->required();
    s->add_option("--out", sm.out)->capture_default_str();
    s->callback([&] { run = [&] { return simulate(common, sm); }; });

    InvertArgs iv;
    s = app.add_subcommand("invert", "Dose whose predicted alpha best matches a target");
    s->add_option("--model-a", iv.model_a)->required()->check(CLI::ExistingFile);
    s->add_option("--record", iv.record)->required()->check(CLI::ExistingFile);
    s->add_option("--expression", iv.expression)->capture_default_str();
    s->add_option("--alpha", iv.alpha, "6 comma-separated intensities")->required();
    s->add_option("--starts", iv.starts, "Random starts")->capture_default_str()->check(CLI::NonNegativeNumber);
    s->add_option("--out", iv.out)->capture_default_str();
    s->callback([&] { run = [&] { return invert(common, iv); }; });

    ServeArgs sv;
    s = app.add_subcommand("serve", "Run the planning HTTP service");
    s->add_option("--model", sv.model, "Approach A bundle (or FACEDOSE_MODEL)")->check(CLI::ExistingFile);
    s->add_option("--bind", sv.bind, "host:port (or FACEDOSE_BIND)");
    s->callback([&] { run = [&] { return serve(common, sv); }; });

    CLI11_PARSE(app, argc, argv);
    try {
        return run();
    } catch (const facedose::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
