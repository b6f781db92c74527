#include "facedose/serialization.hpp"

#include "json_io.hpp"

#include <fstream>
#include <sstream>

namespace facedose {
namespace io {

json parse(std::string_view text, Errc code)
{
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw Error(code, std::string("malformed JSON: ") + e.what(), "byte " + std::to_string(e.byte));
    }
}

void require_schema(const json& j, std::string_view expected, Errc code)
{
    if (!j.is_object()) throw Error(code, "document is not a JSON object", "$");
    const auto it = j.find("schema");
    if (it == j.end() || !it->is_string()) throw Error(code, "missing schema field", "$.schema");
    if (it->get_ref<const std::string&>() != expected) {
        throw Error(code, "schema is '" + it->get<std::string>() + "', expected '" + std::string(expected) + "'",
                    "$.schema");
    }
}

const json& at(const json& j, const char* key, const std::string& path, Errc code)
{
    if (!j.is_object()) throw Error(code, "expected an object", path);
    const auto it = j.find(key);
    if (it == j.end()) throw Error(code, std::string("missing field '") + key + "'", path + "." + key);
    return *it;
}

double number(const json& j, const std::string& path, Errc code)
{
    if (!j.is_number()) throw Error(code, "expected a number", path);
    return j.get<double>();
}

std::int64_t integer(const json& j, const std::string& path, Errc code)
{
    if (!j.is_number_integer()) throw Error(code, "expected an integer", path);
    return j.get<std::int64_t>();
}

std::uint64_t unsigned_integer(const json& j, const std::string& path, Errc code)
{
    if (!j.is_number_unsigned()) throw Error(code, "expected a non-negative integer", path);
    return j.get<std::uint64_t>();
}

std::string string(const json& j, const std::string& path, Errc code)
{
    if (!j.is_string()) throw Error(code, "expected a string", path);
    return j.get<std::string>();
}

const json& array(const json& j, const std::string& path, Errc code, std::ptrdiff_t expected_size)
{
    if (!j.is_array()) throw Error(code, "expected an array", path);
    if (expected_size >= 0 && static_cast<std::ptrdiff_t>(j.size()) != expected_size) {
        throw Error(code, "expected " + std::to_string(expected_size) + " entries, got " + std::to_string(j.size()),
                    path);
    }
    return j;
}

namespace {

std::string idx(const std::string& path, std::size_t i)
{
    return path + "[" + std::to_string(i) + "]";
}

template <std::size_t N>
json array_json(const std::array<double, N>& a)
{
    return json(std::vector<double>(a.begin(), a.end()));
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const std::string& path, Errc code)
{
    array(j, path, code, static_cast<std::ptrdiff_t>(N));
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = number(j[i], idx(path, i), code);
    return out;
}

std::vector<int> int_list(const json& j, const std::string& path)
{
    array(j, path);
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(static_cast<int>(integer(j[i], idx(path, i))));
    return out;
}

} // namespace

json to_json(const LandmarkSet& l)
{
    json pts = json::array();
    for (const Point2& p : l.points()) pts.push_back({p.x(), p.y()});
    return {{"frame", {l.frame().width, l.frame().height}}, {"points", std::move(pts)}};
}

LandmarkSet landmarks_from(const json& j, const std::string& path, Errc code)
{
    const json& frame = array(at(j, "frame", path, code), path + ".frame", code, 2);
    const FrameSize fs{static_cast<int>(integer(frame[0], path + ".frame[0]", code)),
                       static_cast<int>(integer(frame[1], path + ".frame[1]", code))};
    const std::string pp = path + ".points";
    const json& pts = array(at(j, "points", path, code), pp, code);
    if (pts.size() != kLandmarkCount) {
        throw Error(code, "expected 468 landmarks, got " + std::to_string(pts.size()), pp);
    }
    std::vector<Point2> points;
    points.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto xy = fixed_array<2>(pts[i], idx(pp, i), code);
        points.emplace_back(xy[0], xy[1]);
    }
    try {
        return LandmarkSet(std::move(points), fs);
    } catch (const Error& e) {
        throw Error(code, e.message(), e.location().empty() ? path : path + "." + e.location());
    }
}

json to_json(const LatentCode& w)
{
    return {{"shape", {w.shape().layers, w.shape().dims}},
            {"values", std::vector<double>(w.flat().data(), w.flat().data() + w.flat().size())}};
}

LatentCode latent_from(const json& j, const std::string& path, Errc code)
{
    const json& shape = array(at(j, "shape", path, code), path + ".shape", code, 2);
    const LatentShape s{static_cast<int>(integer(shape[0], path + ".shape[0]", code)),
                        static_cast<int>(integer(shape[1], path + ".shape[1]", code))};
    if (s.layers <= 0 || s.dims <= 0 || s.layers > kMaxLatentLayers || s.dims > kMaxLatentDims) {
        throw Error(code, "latent shape out of range", path + ".shape");
    }
    const json& values = array(at(j, "values", path, code), path + ".values", code, s.size());
    Eigen::VectorXd v(s.size());
    for (int i = 0; i < s.size(); ++i) v[i] = number(values[i], idx(path + ".values", i), code);
    return LatentCode(s, std::move(v));
}

json to_json(const DoseVector& u)
{
    return array_json(u.units);
}

DoseVector dose_from(const json& j, const std::string& path, Errc code)
{
    DoseVector u;
    u.units = fixed_array<kMuscleCount>(j, path, code);
    return u;
}

json to_json(const AlphaVector& a)
{
    return array_json(a.values);
}

AlphaVector alpha_from(const json& j, const std::string& path, Errc code)
{
    AlphaVector a;
    a.values = fixed_array<kRegionCount>(j, path, code);
    return a;
}

json to_json(const MetricVector& m)
{
    json out = json::object();
    for (std::size_t k = 0; k < kMetricCount; ++k) out[std::string(metric_key(static_cast<Metric>(k)))] = m[k];
    return out;
}

MetricVector metrics_from(const json& j, const std::string& path, Errc code)
{
    MetricVector m;
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        const std::string key(metric_key(static_cast<Metric>(k)));
        m[k] = number(at(j, key.c_str(), path, code), path + "." + key, code);
    }
    return m;
}

json to_json(const AxisBasis& b)
{
    json axes = json::array();
    for (const LatentCode& v : b.axes) axes.push_back(to_json(v));
    return {{"patient_id", b.patient_id}, {"axes", std::move(axes)}};
}

AxisBasis basis_from(const json& j, const std::string& path, Errc code)
{
    AxisBasis b;
    b.patient_id = string(at(j, "patient_id", path, code), path + ".patient_id", code);
    const json& axes = array(at(j, "axes", path, code), path + ".axes", code, kRegionCount);
    for (std::size_t k = 0; k < kRegionCount; ++k) {
        b.axes[k] = latent_from(axes[k], idx(path + ".axes", k), code);
        if (!b.axes[k].all_finite()) throw Error(code, "axis has non-finite entries", idx(path + ".axes", k));
        if (!(b.axes[k].shape() == b.axes[0].shape())) throw Error(code, "axes differ in shape", idx(path + ".axes", k));
    }
    return b;
}

json to_json(const PatientRecord& r)
{
    json sessions = json::array();
    for (const Session& s : r.sessions) {
        json js = to_json(s.landmarks);
        js["expression"] = s.expression;
        js["timestamp"] = s.timestamp;
        js["phase"] = std::string(phase_name(s.phase));
        sessions.push_back(std::move(js));
    }
    return {{"schema", "facedose.patient/1"},
            {"patient_id", r.patient_id},
            {"dose", to_json(r.dose)},
            {"metadata", r.metadata},
            {"sessions", std::move(sessions)}};
}

PatientRecord record_from(const json& j)
{
    constexpr Errc code = Errc::ingest_error;
    require_schema(j, "facedose.patient/1", code);
    PatientRecord r;
    r.patient_id = string(at(j, "patient_id", "$", code), "patient_id", code);
    const json& dose = array(at(j, "dose", "$", code), "dose", code);
    if (dose.size() != kMuscleCount) {
        throw Error(code, "expected 22 doses, got " + std::to_string(dose.size()), "dose");
    }
    r.dose = dose_from(dose, "dose", code);
    if (const auto it = j.find("metadata"); it != j.end()) {
        if (!it->is_object()) throw Error(code, "metadata must be an object", "metadata");
        for (const auto& [k, v] : it->items()) r.metadata[k] = string(v, "metadata." + k, code);
    }
    const json& sessions = array(at(j, "sessions", "$", code), "sessions", code);
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const std::string sp = idx("sessions", i);
        const json& s = sessions[i];
        const std::string phase = string(at(s, "phase", sp, code), sp + ".phase", code);
        if (phase != "pre" && phase != "post") throw Error(code, "phase must be 'pre' or 'post'", sp + ".phase");
        r.sessions.push_back(Session{string(at(s, "expression", sp, code), sp + ".expression", code),
                                     landmarks_from(s, sp, code),
                                     integer(at(s, "timestamp", sp, code), sp + ".timestamp", code),
                                     phase == "pre" ? Phase::pre : Phase::post});
    }
    return r;
}

json to_json(const GbmModel& m)
{
    const GbmConfig& c = m.config();
    json trees = json::array();
    for (const auto& ensemble : m.trees()) {
        json list = json::array();
        for (const RegressionTree& t : ensemble) {
            json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
                 value = json::array(), samples = json::array();
            for (const TreeNode& n : t.nodes) {
                feature.push_back(n.feature);
                threshold.push_back(n.threshold);
                left.push_back(n.left);
                right.push_back(n.right);
                value.push_back(n.value);
                samples.push_back(n.samples);
            }
            list.push_back({{"feature", feature},
                            {"threshold", threshold},
                            {"left", left},
                            {"right", right},
                            {"value", value},
                            {"samples", samples}});
        }
        trees.push_back(std::move(list));
    }
    return {{"schema", "facedose.gbm/1"},
            {"config",
             {{"n_trees", c.n_trees},
              {"max_depth", c.max_depth},
              {"learning_rate", c.learning_rate},
              {"min_samples_leaf", c.min_samples_leaf},
              {"subsample", c.subsample},
              {"seed", c.seed}}},
            {"n_features", m.n_features()},
            {"base", m.base_prediction()},
            {"trees", std::move(trees)}};
}

GbmModel gbm_from(const json& j, const std::string& path)
{
    require_schema(j, "facedose.gbm/1");
    const json& c = at(j, "config", path);
    const std::string cp = path + ".config";
    GbmConfig cfg;
    cfg.n_trees = static_cast<int>(integer(at(c, "n_trees", cp), cp + ".n_trees"));
    cfg.max_depth = static_cast<int>(integer(at(c, "max_depth", cp), cp + ".max_depth"));
    cfg.learning_rate = number(at(c, "learning_rate", cp), cp + ".learning_rate");
    cfg.min_samples_leaf = static_cast<int>(integer(at(c, "min_samples_leaf", cp), cp + ".min_samples_leaf"));
    cfg.subsample = number(at(c, "subsample", cp), cp + ".subsample");
    cfg.seed = unsigned_integer(at(c, "seed", cp), cp + ".seed");

    const int n_features = static_cast<int>(integer(at(j, "n_features", path), path + ".n_features"));
    const json& base_j = array(at(j, "base", path), path + ".base");
    std::vector<double> base;
    for (std::size_t k = 0; k < base_j.size(); ++k) base.push_back(number(base_j[k], idx(path + ".base", k)));
    const json& trees_j = array(at(j, "trees", path), path + ".trees", Errc::format_error,
                                static_cast<std::ptrdiff_t>(base.size()));
    std::vector<std::vector<RegressionTree>> trees(base.size());
    for (std::size_t k = 0; k < trees_j.size(); ++k) {
        const std::string kp = idx(path + ".trees", k);
        const json& list = array(trees_j[k], kp);
        for (std::size_t t = 0; t < list.size(); ++t) {
            const std::string tp = idx(kp, t);
            const json& feature = array(at(list[t], "feature", tp), tp + ".feature");
            const auto n = static_cast<std::ptrdiff_t>(feature.size());
            const json& threshold = array(at(list[t], "threshold", tp), tp + ".threshold", Errc::format_error, n);
            const json& left = array(at(list[t], "left", tp), tp + ".left", Errc::format_error, n);
            const json& right = array(at(list[t], "right", tp), tp + ".right", Errc::format_error, n);
            const json& value = array(at(list[t], "value", tp), tp + ".value", Errc::format_error, n);
            const json& samples = array(at(list[t], "samples", tp), tp + ".samples", Errc::format_error, n);
            RegressionTree tree;
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                TreeNode node;
                node.feature = static_cast<int>(integer(feature[i], idx(tp + ".feature", i)));
                node.threshold = number(threshold[i], idx(tp + ".threshold", i));
                node.left = static_cast<int>(integer(left[i], idx(tp + ".left", i)));
                node.right = static_cast<int>(integer(right[i], idx(tp + ".right", i)));
                node.value = number(value[i], idx(tp + ".value", i));
                node.samples = static_cast<int>(integer(samples[i], idx(tp + ".samples", i)));
                tree.nodes.push_back(node);
            }
            trees[k].push_back(std::move(tree));
        }
    }
    try {
        return GbmModel(cfg, n_features, std::move(base), std::move(trees));
    } catch (const Error& e) {
        throw Error(Errc::format_error, e.message(), path);
    }
}

json to_json(const Eigen::MatrixXd& m)
{
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", std::move(values)}};
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& path, Errc code)
{
    const auto rows = integer(at(j, "rows", path, code), path + ".rows", code);
    const auto cols = integer(at(j, "cols", path, code), path + ".cols", code);
    if (rows < 0 || cols < 0) throw Error(code, "negative matrix dimension", path);
    const json& values = array(at(j, "values", path, code), path + ".values", code, rows * cols);
    Eigen::MatrixXd m(rows, cols);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c, ++i) m(r, c) = number(values[i], idx(path + ".values", i), code);
    return m;
}

} // namespace io

using io::json;

namespace {

std::string dump(const json& j)
{
    return j.dump(1) + "\n";
}

} // namespace

// ------------------------------------------------------------------ world

std::string save_world(const SyntheticWorld& world)
{
    const SyntheticWorldConfig& c = world.config();
    json base = json::array();
    for (const Point2& p : world.base_face()) base.push_back({p.x(), p.y()});
    return dump({{"schema", "facedose.world/1"},
                 {"config",
                  {{"seed", c.seed},
                   {"shape", {c.shape.layers, c.shape.dims}},
                   {"epsilon", c.epsilon},
                   {"noise_sigma", c.noise_sigma},
                   {"ridge_lambda", c.ridge_lambda},
                   {"pixel_scale", c.pixel_scale}}},
                 {"base_face", std::move(base)},
                 {"block_size", world.block_size()},
                 {"rest_symmetric", world.rest_symmetric()},
                 {"mixing", io::to_json(world.mixing())}});
}

SyntheticWorld load_world(std::string_view text)
{
    const json j = io::parse(text);
    io::require_schema(j, "facedose.world/1");
    const json& c = io::at(j, "config", "$");
    SyntheticWorldConfig cfg;
    cfg.seed = io::unsigned_integer(io::at(c, "seed", "$.config"), "$.config.seed");
    const json& shape = io::array(io::at(c, "shape", "$.config"), "$.config.shape", Errc::format_error, 2);
    cfg.shape = {static_cast<int>(io::integer(shape[0], "$.config.shape[0]")),
                 static_cast<int>(io::integer(shape[1], "$.config.shape[1]"))};
    cfg.epsilon = io::number(io::at(c, "epsilon", "$.config"), "$.config.epsilon");
    cfg.noise_sigma = io::number(io::at(c, "noise_sigma", "$.config"), "$.config.noise_sigma");
    cfg.ridge_lambda = io::number(io::at(c, "ridge_lambda", "$.config"), "$.config.ridge_lambda");
    cfg.pixel_scale = io::number(io::at(c, "pixel_scale", "$.config"), "$.config.pixel_scale");
    if (cfg.shape.layers <= 0 || cfg.shape.dims <= 0 || cfg.shape.layers > kMaxLatentLayers ||
        cfg.shape.dims > kMaxLatentDims) {
        throw Error(Errc::format_error, "latent shape out of range", "$.config.shape");
    }

    const json& base_j = io::array(io::at(j, "base_face", "$"), "$.base_face", Errc::format_error, kLandmarkCount);
    std::vector<Point2> base;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const json& p = io::array(base_j[i], "$.base_face", Errc::format_error, 2);
        base.emplace_back(io::number(p[0], "$.base_face"), io::number(p[1], "$.base_face"));
    }
    Eigen::MatrixXd mixing = io::matrix_from(io::at(j, "mixing", "$"), "$.mixing");
    const int block = static_cast<int>(io::integer(io::at(j, "block_size", "$"), "$.block_size"));
    const int rest_sym = static_cast<int>(io::integer(io::at(j, "rest_symmetric", "$"), "$.rest_symmetric"));
    try {
        return SyntheticWorld(cfg, std::move(base), std::move(mixing), block, rest_sym);
    } catch (const Error& e) {
        throw Error(Errc::format_error, e.message(), "$");
    }
}

// ----------------------------------------------------------- region table

std::string save_region_table(const RegionIndexTable& t)
{
    json roi = json::object();
    for (Region r : kAllRegions) roi[std::string(region_name(r))] = t.roi(r);
    std::string side;
    for (Side s : t.side) side.push_back(s == Side::left ? 'L' : s == Side::right ? 'R' : 'M');
    return dump({{"schema", "facedose.regions/1"},
                 {"brow_left", t.brow_left},
                 {"brow_right", t.brow_right},
                 {"eye_left", t.eye_left},
                 {"eye_right", t.eye_right},
                 {"furrow_left", t.furrow_left},
                 {"furrow_right", t.furrow_right},
                 {"mouth_corner_left", t.mouth_corner_left},
                 {"mouth_corner_right", t.mouth_corner_right},
                 {"outer_brow_left", t.outer_brow_left},
                 {"outer_brow_right", t.outer_brow_right},
                 {"nose_tip", t.nose_tip},
                 {"mouth_center", t.mouth_center},
                 {"roi", std::move(roi)},
                 {"mirror", t.mirror},
                 {"side", side}});
}

RegionIndexTable load_region_table(std::string_view text)
{
    const json j = io::parse(text);
    io::require_schema(j, "facedose.regions/1");
    RegionIndexTable t;
    auto list = [&](const char* key) { return io::int_list(io::at(j, key, "$"), std::string("$.") + key); };
    auto one = [&](const char* key) {
        return static_cast<int>(io::integer(io::at(j, key, "$"), std::string("$.") + key));
    };
    t.brow_left = list("brow_left");
    t.brow_right = list("brow_right");
    t.eye_left = list("eye_left");
    t.eye_right = list("eye_right");
    t.furrow_left = list("furrow_left");
    t.furrow_right = list("furrow_right");
    t.mouth_corner_left = one("mouth_corner_left");
    t.mouth_corner_right = one("mouth_corner_right");
    t.outer_brow_left = one("outer_brow_left");
    t.outer_brow_right = one("outer_brow_right");
    t.nose_tip = one("nose_tip");
    t.mouth_center = list("mouth_center");
    t.mirror = list("mirror");
    const json& roi = io::at(j, "roi", "$");
    for (Region r : kAllRegions) {
        const std::string key(region_name(r));
        t.roi_regions[static_cast<int>(r)] = io::int_list(io::at(roi, key.c_str(), "$.roi"), "$.roi." + key);
    }
    if (const auto it = j.find("side"); it != j.end()) {
        const std::string side = io::string(*it, "$.side");
        if (side.size() != kLandmarkCount) throw Error(Errc::format_error, "side needs 468 letters", "$.side");
        for (char ch : side) {
            if (ch != 'L' && ch != 'R' && ch != 'M') throw Error(Errc::format_error, "side letters are L, R or M", "$.side");
            t.side.push_back(ch == 'L' ? Side::left : ch == 'R' ? Side::right : Side::midline);
        }
    } else {
        if (t.mirror.size() != kLandmarkCount) throw Error(Errc::format_error, "mirror needs 468 entries", "$.mirror");
        t.assign_default_sides();
    }
    try {
        t.validate();
    } catch (const Error& e) {
        throw Error(Errc::format_error, e.message(), e.location());
    }
    return t;
}

// -------------------------------------------------------------------- ROI

std::string save_roi_masks(const RoiSet& masks)
{
    json list = json::array();
    for (const RoiMask& m : masks) {
        list.push_back({{"region_id", std::string(region_name(m.region))},
                        {"rect", {m.rect.x0, m.rect.y0, m.rect.x1, m.rect.y1}}});
    }
    return dump({{"schema", "facedose.roi/1"}, {"masks", std::move(list)}});
}

RoiSet load_roi_masks(std::string_view text)
{
    const json j = io::parse(text);
    io::require_schema(j, "facedose.roi/1");
    const json& list = io::array(io::at(j, "masks", "$"), "$.masks", Errc::format_error, kRegionCount);
    RoiSet out;
    std::array<bool, kRegionCount> seen{};
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string p = "$.masks[" + std::to_string(i) + "]";
        const std::string name = io::string(io::at(list[i], "region_id", p), p + ".region_id");
        const auto region = region_from_name(name);
        if (!region) throw Error(Errc::format_error, "unknown region '" + name + "'", p + ".region_id");
        const int k = static_cast<int>(*region);
        if (seen[k]) throw Error(Errc::format_error, "region listed twice", p + ".region_id");
        seen[k] = true;
        const json& rect = io::array(io::at(list[i], "rect", p), p + ".rect", Errc::format_error, 4);
        out[k] = RoiMask{*region, RoiRect{io::number(rect[0], p + ".rect[0]"), io::number(rect[1], p + ".rect[1]"),
                                          io::number(rect[2], p + ".rect[2]"), io::number(rect[3], p + ".rect[3]")}};
    }
    try {
        validate_roi_set(out);
    } catch (const Error& e) {
        throw Error(Errc::format_error, e.message(), e.location());
    }
    return out;
}

// ------------------------------------------------------------------ basis

std::string save_basis(const AxisBasis& basis, std::string_view world_hash)
{
    json j = io::to_json(basis);
    j["schema"] = "facedose.basis/1";
    j["world_hash"] = std::string(world_hash);
    return dump(j);
}

AxisBasis load_basis(std::string_view text, std::string* world_hash)
{
    const json j = io::parse(text);
    io::require_schema(j, "facedose.basis/1");
    AxisBasis b = io::basis_from(j, "$");
    const std::string hash = io::string(io::at(j, "world_hash", "$"), "$.world_hash");
    if (world_hash) *world_hash = hash;
    return b;
}

// ------------------------------------------------------------------ models

std::string save_gbm(const GbmModel& model)
{
    return dump(io::to_json(model));
}

GbmModel load_gbm(std::string_view text)
{
    return io::gbm_from(io::parse(text), "$");
}

std::string save_bundle_a(const ApproachABundle& bundle)
{
    json doses = json::array();
    for (const DoseVector& u : bundle.training_doses) doses.push_back(io::to_json(u));
    return dump({{"schema", "facedose.approach_a/1"}, {"model", io::to_json(bundle.model)}, {"training_doses", doses}});
}

ApproachABundle load_bundle_a(std::string_view text)
{
    const json j = io::parse(text);
    io::require_schema(j, "facedose.approach_a/1");
    ApproachABundle b;
    b.model = io::gbm_from(io::at(j, "model", "$"), "$.model");
    const json& doses = io::array(io::at(j, "training_doses", "$"), "$.training_doses");
    for (std::size_t i = 0; i < doses.size(); ++i) {
        b.training_doses.push_back(io::dose_from(doses[i], "$.training_doses[" + std::to_string(i) + "]"));
    }
    return b;
}

// ---------------------------------------------------------------- records

std::string save_landmarks(const LandmarkSet& landmarks)
{
    return dump(io::to_json(landmarks));
}

LandmarkSet load_landmarks(std::string_view text)
{
    return io::landmarks_from(io::parse(text), "$");
}

std::string save_record(const PatientRecord& record)
{
    return dump(io::to_json(record));
}

PatientRecord load_record(std::string_view text)
{
    return io::record_from(io::parse(text, Errc::ingest_error));
}

std::string save_case(const TrainingCase& c)
{
    return dump({{"schema", "facedose.case/1"},
                 {"patient_id", c.patient_id},
                 {"expression", c.expression},
                 {"w_src", io::to_json(c.w_src)},
                 {"basis", io::to_json(c.basis)},
                 {"m_src", io::to_json(c.m_src)},
                 {"m_post", io::to_json(c.m_post)},
                 {"u", io::to_json(c.u)},
                 {"alpha_gt", c.alpha_gt ? io::to_json(*c.alpha_gt) : json(nullptr)},
                 {"post_face", c.post_face ? io::to_json(*c.post_face) : json(nullptr)}});
}

TrainingCase load_case(std::string_view text)
{
    const json j = io::parse(text);
    io::require_schema(j, "facedose.case/1");
    TrainingCase c;
    c.patient_id = io::string(io::at(j, "patient_id", "$"), "$.patient_id");
    c.expression = io::string(io::at(j, "expression", "$"), "$.expression");
    c.w_src = io::latent_from(io::at(j, "w_src", "$"), "$.w_src");
    c.basis = io::basis_from(io::at(j, "basis", "$"), "$.basis");
    c.m_src = io::metrics_from(io::at(j, "m_src", "$"), "$.m_src");
    c.m_post = io::metrics_from(io::at(j, "m_post", "$"), "$.m_post");
    c.u = io::dose_from(io::at(j, "u", "$"), "$.u");
    if (const json& a = io::at(j, "alpha_gt", "$"); !a.is_null()) c.alpha_gt = io::alpha_from(a, "$.alpha_gt");
    if (const json& f = io::at(j, "post_face", "$"); !f.is_null()) c.post_face = io::landmarks_from(f, "$.post_face");
    return c;
}

std::string save_sealed_truth(const SealedTruth& truth)
{
    json patients = json::array();
    for (const PatientTruth& p : truth.patients) {
        json w = json::array(), bases = json::array();
        for (const LatentCode& c : p.w_src) w.push_back(io::to_json(c));
        for (const AxisBasis& b : p.basis) bases.push_back(io::to_json(b));
        patients.push_back({{"patient_id", p.patient_id},
                            {"alpha", io::to_json(p.alpha)},
                            {"expressions", p.expressions},
                            {"w_src", std::move(w)},
                            {"basis", std::move(bases)}});
    }
    return dump({{"schema", "facedose.sealed/1"},
                 {"gain", io::to_json(truth.gain)},
                 {"saturation", truth.saturation},
                 {"world_hash", truth.world_hash},
                 {"patients", std::move(patients)}});
}

SealedTruth load_sealed_truth(std::string_view text)
{
    const json j = io::parse(text);
    io::require_schema(j, "facedose.sealed/1");
    SealedTruth t;
    t.gain = io::matrix_from(io::at(j, "gain", "$"), "$.gain");
    t.saturation = io::number(io::at(j, "saturation", "$"), "$.saturation");
    t.world_hash = io::string(io::at(j, "world_hash", "$"), "$.world_hash");
    const json& patients = io::array(io::at(j, "patients", "$"), "$.patients");
    for (std::size_t i = 0; i < patients.size(); ++i) {
        const std::string p = "$.patients[" + std::to_string(i) + "]";
        PatientTruth pt;
        pt.patient_id = io::string(io::at(patients[i], "patient_id", p), p + ".patient_id");
        pt.alpha = io::alpha_from(io::at(patients[i], "alpha", p), p + ".alpha");
        const json& ex = io::array(io::at(patients[i], "expressions", p), p + ".expressions");
        const json& w = io::array(io::at(patients[i], "w_src", p), p + ".w_src", Errc::format_error,
                                  static_cast<std::ptrdiff_t>(ex.size()));
        const json& b = io::array(io::at(patients[i], "basis", p), p + ".basis", Errc::format_error,
                                  static_cast<std::ptrdiff_t>(ex.size()));
        for (std::size_t x = 0; x < ex.size(); ++x) {
            pt.expressions.push_back(io::string(ex[x], p + ".expressions"));
            pt.w_src.push_back(io::latent_from(w[x], p + ".w_src"));
            pt.basis.push_back(io::basis_from(b[x], p + ".basis"));
        }
        t.patients.push_back(std::move(pt));
    }
    return t;
}

std::string save_training_report(const TrainingReport& report)
{
    json excluded = json::object();
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        excluded[std::string(metric_key(static_cast<Metric>(k)))] = report.excluded[k];
    }
    return dump({{"schema", "facedose.training_report/1"},
                 {"n_cases", report.n_cases},
                 {"excluded", std::move(excluded)},
                 {"mse", report.mse}});
}

// -------------------------------------------------------------------- files

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open file for reading", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io_error, "cannot open file for writing", tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw Error(Errc::io_error, "write failed", tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace facedose
