#include "commands.hpp"

#include <facedose/cohort.hpp>
#include <facedose/doseresponse.hpp>
#include <facedose/error.hpp>
#include <facedose/evaluation.hpp>
#include <facedose/serialization.hpp>
#include <facedose/service.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <iostream>
#include <set>

namespace facedose::cli {

using json = nlohmann::json;

namespace {

std::vector<fs::path> json_files(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw Error(Errc::io_error, "not a directory", dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const fs::path& p = e.path();
        if (e.is_regular_file() && p.extension() == ".json" && p.filename().string().rfind("manifest-", 0) != 0) {
            files.push_back(p);
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

/// Records of a directory, ignoring manifests.
std::vector<PatientRecord> read_records(const fs::path& dir)
{
    std::vector<PatientRecord> out;
    for (const fs::path& f : json_files(dir)) {
        std::vector<PatientRecord> one = ingest(f);
        out.insert(out.end(), one.begin(), one.end());
    }
    if (out.empty()) throw Error(Errc::insufficient_data, "no patient records found", dir.string());
    return out;
}

const Session& latest_pre(const PatientRecord& r, const std::string& expression)
{
    const Session* best = nullptr;
    for (const Session& s : r.sessions) {
        if (s.phase == Phase::pre && s.expression == expression && (!best || s.timestamp > best->timestamp)) {
            best = &s;
        }
    }
    if (!best) {
        throw Error(Errc::insufficient_data, "no pre-treatment photo for expression '" + expression + "'",
                    r.patient_id);
    }
    return *best;
}

PatientRecord read_one_record(const std::string& path)
{
    std::vector<PatientRecord> r = ingest(path);
    if (r.size() != 1) throw Error(Errc::invalid_config, "expected a single record file", path);
    return r.front();
}

GbmConfig gbm_config(const Common& c, const TrainArgs& a)
{
    GbmConfig g;
    g.n_trees = a.n_trees;
    g.max_depth = a.max_depth;
    g.learning_rate = a.learning_rate;
    g.min_samples_leaf = a.min_samples_leaf;
    g.subsample = a.subsample;
    g.seed = c.seed;
    g.validate();
    return g;
}

DoseVector to_dose(const std::vector<double>& v)
{
    DoseVector u;
    std::copy(v.begin(), v.end(), u.units.begin());
    return u;
}

AlphaVector to_alpha(const std::vector<double>& v)
{
    AlphaVector a;
    std::copy(v.begin(), v.end(), a.values.begin());
    return a;
}

json metrics_json(const MetricVector& m)
{
    json out = json::object();
    for (std::size_t k = 0; k < kMetricCount; ++k) out[std::string(metric_key(static_cast<Metric>(k)))] = m[k];
    return out;
}

/// Accepted feedback of a service data directory as approach A cases: the
/// validated dose paired with the alpha the session showed for it.
std::vector<TrainingCase> feedback_cases(const fs::path& service_dir)
{
    service::Store store(service_dir);
    std::vector<TrainingCase> out;
    for (const service::FeedbackRecord& f : store.feedback()) {
        if (!f.accepted) continue;
        const auto s = store.session(f.session_id);
        if (!s) throw Error(Errc::invalid_data, "feedback references a missing session", f.session_id);
        const service::HistoryEntry* match = nullptr;
        for (const service::HistoryEntry& h : s->history) {
            if (h.timestamp <= f.timestamp && h.dose.units == f.u_new.units) match = &h;
        }
        if (!match) continue; // dose never shown in the session: nothing to learn from
        TrainingCase c;
        c.patient_id = s->patient_id;
        c.expression = s->expression;
        c.m_src = s->m_src;
        c.u = f.u_new;
        c.alpha_gt = match->alpha;
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace

int cohort_gen(const Common& c, const CohortGenArgs& a)
{
    CohortConfig cc;
    cc.n_patients = a.patients;
    cc.images_per_patient = a.per_patient;
    cc.seed = c.seed;
    cc.noise_sigma = a.noise;
    cc.asymmetry_scale = a.asymmetry;
    cc.world.seed = c.seed;
    const Cohort cohort = generate_cohort(cc);
    const PatientSplit split = split_by_patient(cohort.records, a.ratio, c.seed);

    const fs::path dir = output_dir(c, a.out);
    for (const char* sub : {"records", "train", "test"}) fs::remove_all(dir / sub);
    export_records(cohort.records, dir / "records");
    export_records(split.train, dir / "train");
    export_records(split.test, dir / "test");
    write_text_file(dir / "sealed_truth.json", save_sealed_truth(cohort.truth));
    write_text_file(dir / "world.json", save_world(cohort.world));

    Manifest m("cohort-gen", c);
    m.arg("patients", a.patients);
    m.arg("per_patient", a.per_patient);
    m.arg("noise", a.noise);
    m.arg("asymmetry", a.asymmetry);
    m.arg("ratio", a.ratio);
    for (const char* f : {"records", "train", "test", "sealed_truth.json", "world.json"}) m.output(dir / f);
    m.note("world_hash", cohort.world.version_hash());
    m.write(dir);
    std::cout << fmt::format("wrote {} patients ({} train / {} test) to {}\n", cohort.records.size(),
                             split.train.size(), split.test.size(), dir.string());
    return 0;
}

int ingest_records(const Common& c, const IngestArgs& a)
{
    const std::vector<PatientRecord> records = ingest(a.input);
    const fs::path dir = output_dir(c, a.out);
    fs::remove_all(dir / "records");
    export_records(records, dir / "records");
    Manifest m("ingest", c);
    m.arg("input", a.input);
    m.input(a.input);
    m.output(dir / "records");
    m.write(dir);
    std::cout << fmt::format("ingested {} records into {}\n", records.size(), (dir / "records").string());
    return 0;
}

int metrics(const Common& c, const MetricsArgs& a)
{
    const PatientRecord r = read_one_record(a.record);
    const RegionIndexTable& table = RegionIndexTable::standard();
    json sessions = json::array();
    std::cout << fmt::format("{:<14} {:<5}", "expression", "phase");
    for (std::size_t k = 0; k < kMetricCount; ++k) std::cout << fmt::format(" {:>20}", metric_key(static_cast<Metric>(k)));
    std::cout << "\n";
    for (const Session& s : r.sessions) {
        const MetricVector m = compute_metrics(align(s.landmarks, table), table);
        std::cout << fmt::format("{:<14} {:<5}", s.expression, phase_name(s.phase));
        for (std::size_t k = 0; k < kMetricCount; ++k) std::cout << fmt::format(" {:>20.6f}", m[k]);
        std::cout << "\n";
        sessions.push_back({{"expression", s.expression},
                            {"phase", phase_name(s.phase)},
                            {"timestamp", s.timestamp},
                            {"metrics", metrics_json(m)}});
    }
    const fs::path dir = output_dir(c, a.out);
    const fs::path file = dir / (r.patient_id + ".metrics.json");
    write_text_file(file, json{{"schema", "facedose.metrics/1"}, {"patient_id", r.patient_id}, {"sessions", sessions}}
                              .dump(1) + "\n");
    Manifest man("metrics", c);
    man.arg("record", a.record);
    man.input(a.record);
    man.output(file);
    man.write(dir);
    return 0;
}

int axes(const Common& c, const AxesArgs& a)
{
    const SyntheticWorld world = load_world_for(c);
    const RegionIndexTable& table = RegionIndexTable::standard();
    const PatientRecord r = read_one_record(a.record);
    const SourceState s =
        source_state(latest_pre(r, a.expression).landmarks, r.patient_id, world, table, default_roi_masks(table));
    const fs::path dir = output_dir(c, a.out);
    const fs::path file = dir / (r.patient_id + "-" + a.expression + ".basis.json");
    write_text_file(file, save_basis(s.basis, world.version_hash()));
    for (std::size_t k = 0; k < kRegionCount; ++k) {
        std::cout << fmt::format("{:<8} |v| = {:.6f}\n", region_name(kAllRegions[k]), s.basis.axes[k].norm());
    }
    Manifest m("axes", c);
    m.arg("record", a.record);
    m.arg("expression", a.expression);
    m.input(a.record);
    m.input(world_path(c));
    m.output(file);
    m.write(dir);
    return 0;
}

int calibrate(const Common& c, const CalibrateArgs& a)
{
    const SyntheticWorld world = load_world_for(c);
    const RegionIndexTable& table = RegionIndexTable::standard();
    CalibrationOptions options;
    if (a.objective == "metrics") {
        options.objective = CalibrationObjective::metrics;
    } else if (a.objective != "landmarks") {
        throw Error(Errc::invalid_config, "objective must be 'landmarks' or 'metrics'", "--objective");
    }
    std::vector<TrainingCase> cases =
        build_training_cases(read_records(a.train_dir), world, table, default_roi_masks(table));
    calibrate_cases(cases, world, table, options);
    const fs::path dir = output_dir(c, a.out);
    for (const fs::path& old : json_files(dir)) fs::remove(old);
    for (const TrainingCase& tc : cases) {
        write_text_file(dir / (tc.patient_id + "__" + tc.expression + ".json"), save_case(tc));
    }
    Manifest m("calibrate", c);
    m.arg("train_dir", a.train_dir);
    m.arg("objective", a.objective);
    m.input(a.train_dir);
    m.input(world_path(c));
    m.output(dir);
    m.write(dir);
    std::cout << fmt::format("calibrated {} cases into {}\n", cases.size(), dir.string());
    return 0;
}

int train(const Common& c, const TrainArgs& a)
{
    if (a.approach != "a" && a.approach != "b") throw Error(Errc::invalid_config, "must be 'a' or 'b'", "--approach");
    if (a.cases.empty() == a.train_dir.empty()) {
        throw Error(Errc::invalid_config, "pass exactly one of --cases and --train-dir", "--cases");
    }
    if (!a.feedback.empty() && a.approach != "a") {
        throw Error(Errc::invalid_config, "feedback refines approach A only", "--feedback");
    }
    const GbmConfig gbm = gbm_config(c, a);
    Manifest m("train " + a.approach, c);
    m.arg("n_trees", a.n_trees);
    m.arg("max_depth", a.max_depth);
    m.arg("learning_rate", a.learning_rate);
    m.arg("min_samples_leaf", a.min_samples_leaf);
    m.arg("subsample", a.subsample);

    std::vector<TrainingCase> cases;
    if (!a.cases.empty()) {
        for (const fs::path& f : json_files(a.cases)) cases.push_back(load_case(read_text_file(f)));
        if (cases.empty()) throw Error(Errc::insufficient_data, "no training cases found", a.cases);
        m.arg("cases", a.cases);
        m.input(a.cases);
    } else {
        const SyntheticWorld world = load_world_for(c);
        const RegionIndexTable& table = RegionIndexTable::standard();
        cases = build_training_cases(read_records(a.train_dir), world, table, default_roi_masks(table));
        if (a.approach == "a") calibrate_cases(cases, world, table);
        m.arg("train_dir", a.train_dir);
        m.input(a.train_dir);
        m.input(world_path(c));
    }
    if (!a.feedback.empty()) {
        const std::vector<TrainingCase> extra = feedback_cases(a.feedback);
        cases.insert(cases.end(), extra.begin(), extra.end());
        m.arg("feedback", a.feedback);
        m.input(fs::path(a.feedback) / "feedback.jsonl");
        m.note("feedback_cases", extra.size());
    }

    const fs::path dir = output_dir(c, a.out);
    TrainingReport report;
    fs::path model_file;
    if (a.approach == "a") {
        ApproachABundle bundle{train_approach_a(cases, gbm, &report), {}};
        std::set<std::array<double, kMuscleCount>> seen;
        for (const TrainingCase& tc : cases) {
            if (seen.insert(tc.u.units).second) bundle.training_doses.push_back(tc.u);
        }
        model_file = dir / "approach_a.json";
        write_text_file(model_file, save_bundle_a(bundle));
    } else {
        const GbmModel model = train_approach_b(cases, gbm, &report);
        model_file = dir / "approach_b.json";
        write_text_file(model_file, save_gbm(model));
    }
    const fs::path report_file = dir / ("approach_" + a.approach + ".report.json");
    write_text_file(report_file, save_training_report(report));
    m.output(model_file);
    m.output(report_file);
    m.write(dir);
    std::size_t excluded = 0;
    for (const auto& e : report.excluded) excluded += e.size();
    std::cout << fmt::format("trained approach {} on {} cases ({} target values excluded) -> {}\n", a.approach,
                             cases.size(), excluded, model_file.string());
    return 0;
}

int evaluate(const Common& c, const EvaluateArgs& a)
{
    const SyntheticWorld world = load_world_for(c);
    const RegionIndexTable& table = RegionIndexTable::standard();
    const RoiSet masks = default_roi_masks(table);
    EvalConfig config;
    config.seed = c.seed;
    config.gbm.seed = c.seed;
    config.control_repeats = a.control_repeats;
    const std::vector<PatientRecord> test = read_records(a.test_dir);

    Manifest m("evaluate", c);
    m.arg("test_dir", a.test_dir);
    m.arg("control_repeats", a.control_repeats);
    m.input(a.test_dir);
    m.input(world_path(c));

    EvalReport report;
    if (a.model_a.empty() && a.model_b.empty()) {
        if (a.train_dir.empty()) {
            throw Error(Errc::invalid_config, "pass --train-dir, or trained models via --model-a/--model-b",
                        "--train-dir");
        }
        m.arg("train_dir", a.train_dir);
        m.input(a.train_dir);
        report = run_comparison(read_records(a.train_dir), test, config, world, table, masks);
    } else {
        if (a.control_repeats > 0) {
            throw Error(Errc::invalid_config, "the shuffled control retrains, so it needs --train-dir without models",
                        "--control-repeats");
        }
        std::optional<GbmModel> model_a, model_b;
        if (!a.model_a.empty()) {
            model_a = load_bundle_a(read_text_file(a.model_a)).model;
            m.arg("model_a", a.model_a);
            m.input(a.model_a);
        }
        if (!a.model_b.empty()) {
            model_b = load_gbm(read_text_file(a.model_b));
            m.arg("model_b", a.model_b);
            m.input(a.model_b);
        }
        report = evaluate_trained(model_a ? &*model_a : nullptr, model_b ? &*model_b : nullptr, test, config, world,
                                  table, masks);
    }

    const fs::path dir = output_dir(c, a.out);
    const std::string table_text = render_table(report);
    write_text_file(dir / "report.json", report_json(report));
    write_text_file(dir / "report.txt", table_text);
    write_text_file(dir / "predictions.csv", predictions_csv(report));
    for (const char* f : {"report.json", "report.txt", "predictions.csv"}) m.output(dir / f);
    m.write(dir);
    std::cout << table_text;
    return 0;
}

int simulate(const Common& c, const SimulateArgs& a)
{
    const SyntheticWorld world = load_world_for(c);
    const RegionIndexTable& table = RegionIndexTable::standard();
    const ApproachABundle bundle = load_bundle_a(read_text_file(a.model_a));
    const PatientRecord r = read_one_record(a.record);
    const DoseVector u = to_dose(parse_list(a.dose, kMuscleCount, "--dose"));
    check_dose(u, default_dose_bounds());
    const SourceState s =
        source_state(latest_pre(r, a.expression).landmarks, r.patient_id, world, table, default_roi_masks(table));
    const PostPrediction p = predict_post_a(u, s.m_src, s.w_src, s.basis, bundle.model, world, table);

    const json out = {{"schema", "facedose.simulation/1"},
                      {"patient_id", r.patient_id},
                      {"expression", a.expression},
                      {"dose", u.units},
                      {"alpha", p.alpha.values},
                      {"m_src", metrics_json(s.m_src)},
                      {"metrics", metrics_json(p.metrics)}};
    const fs::path dir = output_dir(c, a.out);
    const fs::path file = dir / (r.patient_id + "-" + a.expression + ".simulation.json");
    write_text_file(file, out.dump(1) + "\n");
    write_text_file(dir / (r.patient_id + "-" + a.expression + ".face.json"), save_landmarks(p.face));
    Manifest m("simulate", c);
    m.arg("record", a.record);
    m.arg("expression", a.expression);
    m.arg("dose", a.dose);
    m.input(a.model_a);
    m.input(a.record);
    m.input(world_path(c));
    m.output(file);
    m.write(dir);
    std::cout << out.dump(1) << "\n";
    return 0;
}

int invert(const Common& c, const InvertArgs& a)
{
    const SyntheticWorld world = load_world_for(c);
    const RegionIndexTable& table = RegionIndexTable::standard();
    const ApproachABundle bundle = load_bundle_a(read_text_file(a.model_a));
    const PatientRecord r = read_one_record(a.record);
    const AlphaVector target = to_alpha(parse_list(a.alpha, kRegionCount, "--alpha"));
    check_alpha(target);
    const SourceState s =
        source_state(latest_pre(r, a.expression).landmarks, r.patient_id, world, table, default_roi_masks(table));
    InverseOptions options;
    options.random_starts = a.starts;
    options.seed = c.seed;
    options.candidates = bundle.training_doses;
    const InverseResult inv = invert_dose(target, s.m_src, bundle.model, default_dose_bounds(), options);

    const json out = {{"schema", "facedose.inversion/1"},
                      {"patient_id", r.patient_id},
                      {"expression", a.expression},
                      {"alpha_target", target.values},
                      {"dose", inv.dose.units},
                      {"total_units", inv.dose.total()},
                      {"residual", inv.residual},
                      {"evaluations", inv.evaluations}};
    const fs::path dir = output_dir(c, a.out);
    const fs::path file = dir / (r.patient_id + "-" + a.expression + ".inversion.json");
    write_text_file(file, out.dump(1) + "\n");
    Manifest m("invert", c);
    m.arg("record", a.record);
    m.arg("expression", a.expression);
    m.arg("alpha", a.alpha);
    m.arg("starts", a.starts);
    m.input(a.model_a);
    m.input(a.record);
    m.input(world_path(c));
    m.output(file);
    m.write(dir);
    std::cout << out.dump(1) << "\n";
    return 0;
}

int serve(const Common& c, const ServeArgs& a)
{
    service::Options o = service::Options::from_env();
    if (c.data_dir != ".") o.data_dir = c.data_dir;
    if (!c.world.empty() || fs::exists(world_path(c))) o.world_path = world_path(c);
    if (!a.model.empty()) o.model_path = a.model;
    if (!a.bind.empty()) {
        const std::size_t colon = a.bind.rfind(':');
        if (colon == std::string::npos) throw Error(Errc::invalid_config, "expected host:port", "--bind");
        o.host = a.bind.substr(0, colon);
        o.port = std::stoi(a.bind.substr(colon + 1));
    }
    auto svc = service::PlanningService::from_options(o);
    service::HttpServer server(*svc);
    const int port = server.bind(o.host, o.port);
    std::cout << fmt::format("serving on http://{}:{} (data {}, model {})\n", o.host, port, o.data_dir.string(),
                             svc->has_model() ? o.model_path->string() : "none")
              << std::flush;
    return server.listen() ? 0 : 1;
}

} // namespace facedose::cli
