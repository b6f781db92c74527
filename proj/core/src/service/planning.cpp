#include "facedose/service.hpp"

#include "facedose/error.hpp"
#include "facedose/evaluation.hpp"
#include "facedose/geometry.hpp"
#include "facedose/serialization.hpp"
#include "service_json.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <set>

namespace facedose::service {

using io::json;

namespace {

/// A failure with its HTTP status; library errors are mapped in handle().
struct HttpError
{
    int status;
    std::string code;
    std::string message;
    std::string field;
};

HttpError not_found(const std::string& what, const std::string& id)
{
    return {404, "NotFound", what + " '" + id + "' does not exist", {}};
}

int status_of(Errc code)
{
    switch (code) {
    case Errc::out_of_bounds:
    case Errc::degenerate_configuration: return 422;
    case Errc::not_calibrated: return 409;
    case Errc::io_error:
    case Errc::invalid_config:
    case Errc::calibration_diverged: return 500;
    default: return 400;
    }
}

Response envelope(int status, std::string_view code, std::string_view message, std::string_view field)
{
    const json body = {{"code", code}, {"message", message}, {"field", field.empty() ? json(nullptr) : json(field)}};
    return {status, body.dump()};
}

Response ok(int status, const json& body)
{
    return {status, body.dump()};
}

std::vector<std::string> segments(std::string_view path)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        const std::size_t j = path.find('/', i);
        const std::size_t end = j == std::string_view::npos ? path.size() : j;
        if (end > i) out.emplace_back(path.substr(i, end - i));
        i = end;
    }
    return out;
}

/// Ids become file names, so only a conservative alphabet is routed.
bool valid_id(const std::string& id)
{
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
               c == '.';
    });
}

json parse_body(const std::string& body)
{
    if (body.empty()) return json::object();
    json j = io::parse(body);
    if (!j.is_object() && !j.is_array()) throw HttpError{400, "FormatError", "body must be a JSON object", "$"};
    return j;
}

/// Accepts {"<key>": [...]} or a bare array.
const json& vector_field(const json& body, const char* key)
{
    if (body.is_array()) return body;
    const auto it = body.find(key);
    if (it == body.end()) throw HttpError{400, "FormatError", std::string("missing field '") + key + "'", key};
    return *it;
}

std::string query_value(const std::string& query, std::string_view key)
{
    std::size_t i = 0;
    while (i <= query.size()) {
        const std::size_t amp = std::min(query.find('&', i), query.size());
        const std::string_view pair(query.data() + i, amp - i);
        const std::size_t eq = pair.find('=');
        if (eq != std::string_view::npos && pair.substr(0, eq) == key) return std::string(pair.substr(eq + 1));
        i = amp + 1;
    }
    return {};
}

DoseVector checked_dose(const json& j, const std::string& field, const DoseBounds& bounds)
{
    const DoseVector u = io::dose_from(j, field);
    try {
        check_dose(u, bounds);
    } catch (const Error& e) {
        // Name the muscle, not just its index.
        const std::string& loc = e.location();
        const std::size_t j0 = loc.find('[');
        const std::size_t idx = j0 == std::string::npos ? 0 : std::strtoul(loc.c_str() + j0 + 1, nullptr, 10);
        const std::string muscle = MuscleMap::standard().labels.at(idx);
        throw HttpError{status_of(e.code()), std::string(to_string(e.code())), muscle + ": " + e.message(),
                        field + "[" + std::to_string(idx) + "]"};
    }
    return u;
}

AlphaVector checked_alpha(const json& j, const std::string& field)
{
    const AlphaVector a = io::alpha_from(j, field);
    try {
        check_alpha(a);
    } catch (const Error& e) {
        std::string loc = e.location();
        if (loc.rfind("alpha", 0) == 0) loc = field + loc.substr(5);
        const std::size_t k = std::strtoul(loc.c_str() + loc.find('[') + 1, nullptr, 10);
        throw HttpError{status_of(e.code()), std::string(to_string(e.code())),
                        std::string(region_name(kAllRegions.at(k))) + ": " + e.message(), loc};
    }
    return a;
}

struct Simulation
{
    MetricVector metrics;
    LandmarkSet face;
};

Simulation simulate_face(const PlanningSession& s, const AlphaVector& alpha, const Generator& world,
                         const RegionIndexTable& table)
{
    const CanonicalLandmarks aligned = align(world.decode(combine(s.w_src, s.basis, alpha)), table);
    return {compute_metrics(aligned, table), aligned.to_landmark_set()};
}

std::int64_t system_ms()
{
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

} // namespace

PlanningService::PlanningService(std::shared_ptr<const Generator> world, std::optional<ApproachABundle> model,
                                 const std::filesystem::path& data_dir, Clock clock)
    : world_(std::move(world)),
      model_(std::move(model)),
      store_(data_dir),
      clock_(clock ? std::move(clock) : Clock(system_ms)),
      table_(RegionIndexTable::standard()),
      masks_(default_roi_masks(table_)),
      bounds_(default_dose_bounds())
{
    if (!world_) throw Error(Errc::invalid_config, "the service needs a world", "world");
    for (const std::string& id : store_.session_ids()) {
        if (id.size() > 1 && id[0] == 'S') {
            const std::uint64_t n = std::strtoull(id.c_str() + 1, nullptr, 10);
            next_session_ = std::max(next_session_, n + 1);
        }
    }
}

std::unique_ptr<PlanningService> PlanningService::from_options(const Options& options)
{
    std::shared_ptr<const Generator> world;
    if (options.world_path) {
        world = std::make_shared<SyntheticWorld>(load_world(read_text_file(*options.world_path)));
    } else {
        world = std::make_shared<SyntheticWorld>(SyntheticWorld::create({}));
    }
    std::optional<ApproachABundle> model;
    if (options.model_path) model = load_bundle_a(read_text_file(*options.model_path));
    return std::make_unique<PlanningService>(std::move(world), std::move(model), options.data_dir);
}

Response PlanningService::handle(const Request& request)
{
    try {
        const std::vector<std::string> seg = segments(request.path);
        const std::string& m = request.method;
        auto method_is = [&](const char* want) {
            if (m != want) throw HttpError{405, "MethodNotAllowed", m + " is not allowed on " + request.path, {}};
        };
        auto id_at = [&](std::size_t i) -> const std::string& {
            if (!valid_id(seg[i])) throw HttpError{404, "NotFound", "no such resource: " + request.path, {}};
            return seg[i];
        };

        if (seg.size() == 1 && seg[0] == "health") {
            method_is("GET");
            return ok(200, {{"status", "ok"}, {"model_loaded", has_model()}, {"world", world_->version_hash()}});
        }
        if (seg.size() == 1 && seg[0] == "patients") {
            method_is("POST");
            return create_patient(request);
        }
        if (seg.size() == 2 && seg[0] == "patients") {
            method_is("GET");
            return get_patient(id_at(1));
        }
        if (seg.size() == 3 && seg[0] == "patients" && seg[2] == "sessions") {
            method_is("POST");
            return create_session(id_at(1), request);
        }
        if (seg.size() == 2 && seg[0] == "sessions") {
            method_is("GET");
            return get_session(id_at(1));
        }
        if (seg.size() == 3 && seg[0] == "sessions") {
            const std::string& id = id_at(1);
            const std::string& action = seg[2];
            if (action == "adjust" || action == "simulate" || action == "feedback" || action == "close") {
                method_is("POST");
                if (action == "adjust") return adjust(id, request);
                if (action == "simulate") return simulate(id, request);
                if (action == "feedback") return add_feedback(id, request);
                return close(id);
            }
        }
        if (seg.size() == 1 && seg[0] == "feedback") {
            if (m == "GET") return list_feedback(request);
            method_is("POST");
            return add_feedback({}, request);
        }
        throw HttpError{404, "NotFound", "no such resource: " + request.path, {}};
    } catch (const HttpError& e) {
        return envelope(e.status, e.code, e.message, e.field);
    } catch (const Error& e) {
        return envelope(status_of(e.code()), to_string(e.code()), e.message(), e.location());
    } catch (const std::exception& e) {
        return envelope(500, "InternalError", e.what(), {});
    }
}

// ---------------------------------------------------------------- patients

Response PlanningService::create_patient(const Request& r)
{
    const PatientRecord record = io::record_from(io::parse(r.body, Errc::ingest_error));
    validate_record(record, bounds_);
    if (!valid_id(record.patient_id)) {
        throw HttpError{400, "IngestError", "patient id may only use letters, digits, '.', '_' and '-'",
                        "patient_id"};
    }
    if (!store_.add_patient(record)) {
        throw HttpError{409, "Conflict", "patient '" + record.patient_id + "' already exists", "patient_id"};
    }
    return ok(201, {{"patient_id", record.patient_id}});
}

Response PlanningService::get_patient(const std::string& id)
{
    const auto record = store_.patient(id);
    if (!record) throw not_found("patient", id);
    return {200, save_record(*record)};
}

// ---------------------------------------------------------------- sessions

std::shared_ptr<std::mutex> PlanningService::session_lock(const std::string& id)
{
    std::lock_guard lock(locks_mutex_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
}

PlanningSession PlanningService::require_session(const std::string& id) const
{
    auto s = store_.session(id);
    if (!s) throw not_found("session", id);
    return std::move(*s);
}

std::int64_t PlanningService::next_timestamp(const PlanningSession& session) const
{
    const std::int64_t now = clock_();
    return session.history.empty() ? now : std::max(now, session.history.back().timestamp + 1);
}

std::string PlanningService::session_view(const PlanningSession& s) const
{
    const HistoryEntry& cur = s.current();
    const Simulation sim = simulate_face(s, cur.alpha, *world_, table_);
    const LandmarkSet source = align(world_->decode(s.w_src), table_).to_landmark_set();
    json history = json::array();
    for (const HistoryEntry& h : s.history) history.push_back(to_json(h));
    const json j = {{"schema", "facedose.session_view/1"},
                    {"session_id", s.session_id},
                    {"patient_id", s.patient_id},
                    {"expression", s.expression},
                    {"closed", s.closed},
                    {"m_src", io::to_json(s.m_src)},
                    {"current", to_json(cur)},
                    {"metrics", io::to_json(sim.metrics)},
                    {"landmarks", io::to_json(sim.face)},
                    {"source_landmarks", io::to_json(source)},
                    {"history", std::move(history)}};
    return j.dump();
}

Response PlanningService::create_session(const std::string& patient_id, const Request& r)
{
    const json body = parse_body(r.body);
    if (!body.is_object()) throw HttpError{400, "FormatError", "body must be a JSON object", "$"};
    const auto record = store_.patient(patient_id);
    if (!record) throw not_found("patient", patient_id);
    if (!model_) throw HttpError{409, "NoModel", "no approach A model is loaded", {}};

    DoseVector dose;
    if (const auto it = body.find("dose"); it != body.end()) dose = checked_dose(*it, "dose", bounds_);

    std::string expression;
    if (const auto it = body.find("expression"); it != body.end()) {
        expression = io::string(*it, "expression");
    } else {
        const auto neutral = std::find_if(record->sessions.begin(), record->sessions.end(), [](const Session& s) {
            return s.phase == Phase::pre && s.expression == "neutral";
        });
        const auto first = std::find_if(record->sessions.begin(), record->sessions.end(),
                                        [](const Session& s) { return s.phase == Phase::pre; });
        if (first == record->sessions.end()) {
            throw HttpError{422, "NoPreSession", "patient has no pre-treatment photo", "sessions"};
        }
        expression = neutral != record->sessions.end() ? "neutral" : first->expression;
    }
    const Session* photo = nullptr;
    for (const Session& s : record->sessions) {
        if (s.phase == Phase::pre && s.expression == expression && (!photo || s.timestamp > photo->timestamp)) {
            photo = &s;
        }
    }
    if (!photo) {
        throw HttpError{422, "NoPreSession", "patient has no pre-treatment photo for '" + expression + "'",
                        "expression"};
    }

    const SourceState state = source_state(photo->landmarks, patient_id, *world_, table_, masks_);
    PlanningSession s;
    s.patient_id = patient_id;
    s.expression = expression;
    s.w_src = state.w_src;
    s.basis = state.basis;
    // The session lives in generator space: its source is the reconstruction,
    // so alpha = 0 reproduces m_src exactly.
    s.m_src = compute_metrics(align(world_->decode(s.w_src), table_), table_);

    const AlphaVector alpha = predict_alpha(model_->model, dose, s.m_src);
    {
        std::lock_guard lock(create_mutex_);
        do {
            s.session_id = fmt::format("S{:06d}", next_session_++);
        } while (store_.session(s.session_id));
        s.history.push_back({next_timestamp(s), alpha, dose, 0.0, Origin::ai});
        store_.put_session(s);
    }
    return {201, session_view(s)};
}

Response PlanningService::get_session(const std::string& id)
{
    const auto lock = session_lock(id);
    std::lock_guard guard(*lock);
    return {200, session_view(require_session(id))};
}

InverseResult PlanningService::invert(const PlanningSession& s, const AlphaVector& alpha) const
{
    InverseOptions options;
    options.candidates = model_->training_doses;
    std::set<std::array<double, kMuscleCount>> seen;
    for (const HistoryEntry& h : s.history) {
        if (seen.insert(h.dose.units).second) options.candidates.push_back(h.dose);
    }
    return invert_dose(alpha, s.m_src, model_->model, bounds_, options);
}

Response PlanningService::adjust(const std::string& id, const Request& r)
{
    const json body = parse_body(r.body);
    const AlphaVector alpha = checked_alpha(vector_field(body, "alpha"), "alpha");
    const auto lock = session_lock(id);
    std::lock_guard guard(*lock);
    PlanningSession s = require_session(id);
    if (s.closed) throw HttpError{409, "SessionClosed", "session '" + id + "' is closed", {}};
    if (!model_) throw HttpError{409, "NoModel", "no approach A model is loaded", {}};

    HistoryEntry e{next_timestamp(s), alpha, {}, 0.0, Origin::clinician};
    if (alpha.values == s.current().alpha.values) {
        // A no-op commit keeps the dose the session already shows.
        e.dose = s.current().dose;
        e.residual = s.current().residual;
    } else {
        const InverseResult inv = invert(s, alpha);
        e.dose = inv.dose;
        e.residual = inv.residual;
    }
    const Simulation sim = simulate_face(s, alpha, *world_, table_);
    s.history.push_back(e);
    store_.put_session(s);
    return ok(200, {{"dose_estimate", io::to_json(e.dose)},
                    {"residual", e.residual},
                    {"metrics", io::to_json(sim.metrics)},
                    {"landmarks", io::to_json(sim.face)}});
}

Response PlanningService::simulate(const std::string& id, const Request& r)
{
    const json body = parse_body(r.body);
    const DoseVector dose = checked_dose(vector_field(body, "dose"), "dose", bounds_);
    const auto lock = session_lock(id);
    std::lock_guard guard(*lock);
    PlanningSession s = require_session(id);
    if (s.closed) throw HttpError{409, "SessionClosed", "session '" + id + "' is closed", {}};
    if (!model_) throw HttpError{409, "NoModel", "no approach A model is loaded", {}};

    const AlphaVector alpha = predict_alpha(model_->model, dose, s.m_src);
    const Simulation sim = simulate_face(s, alpha, *world_, table_);
    s.history.push_back({next_timestamp(s), alpha, dose, 0.0, Origin::ai});
    store_.put_session(s);
    return ok(200, {{"alpha", io::to_json(alpha)},
                    {"metrics", io::to_json(sim.metrics)},
                    {"landmarks", io::to_json(sim.face)}});
}

Response PlanningService::close(const std::string& id)
{
    const auto lock = session_lock(id);
    std::lock_guard guard(*lock);
    PlanningSession s = require_session(id);
    if (!s.closed) {
        s.closed = true;
        store_.put_session(s);
    }
    return {200, session_view(s)};
}

// ---------------------------------------------------------------- feedback

Response PlanningService::add_feedback(const std::string& session_id, const Request& r)
{
    const json body = parse_body(r.body);
    if (!body.is_object()) throw HttpError{400, "FormatError", "body must be a JSON object", "$"};
    std::string sid = session_id;
    if (sid.empty()) {
        const auto it = body.find("session_id");
        if (it == body.end() || !it->is_string()) {
            throw HttpError{400, "FormatError", "missing field 'session_id'", "session_id"};
        }
        sid = it->get<std::string>();
        if (!valid_id(sid)) throw not_found("session", sid);
    }
    const auto accepted = body.find("accepted");
    if (accepted == body.end() || !accepted->is_boolean()) {
        throw HttpError{400, "FormatError", "'accepted' must be a boolean", "accepted"};
    }

    const auto lock = session_lock(sid);
    std::lock_guard guard(*lock);
    const PlanningSession s = require_session(sid);

    FeedbackRecord f;
    f.session_id = sid;
    f.accepted = accepted->get<bool>();
    f.late = s.closed;
    if (const auto it = body.find("note"); it != body.end()) f.note = io::string(*it, "note");
    f.u_new = s.current().dose;
    if (const auto it = body.find("u_new"); it != body.end()) f.u_new = checked_dose(*it, "u_new", bounds_);
    if (const auto it = body.find("outcome"); it != body.end()) {
        f.outcome = io::metrics_from(*it, "outcome");
    } else {
        f.outcome = simulate_face(s, s.current().alpha, *world_, table_).metrics;
    }

    std::lock_guard feedback_guard(create_mutex_);
    const std::vector<FeedbackRecord> log = store_.feedback();
    if (const auto it = body.find("feedback_id"); it != body.end()) {
        f.feedback_id = io::string(*it, "feedback_id");
        // Clients retry with the same id; the first write wins.
        for (const FeedbackRecord& old : log) {
            if (old.feedback_id == f.feedback_id) {
                if (old.session_id != sid) {
                    throw HttpError{409, "Conflict", "feedback id belongs to another session", "feedback_id"};
                }
                return ok(200, to_json(old));
            }
        }
    } else {
        std::set<std::string> taken;
        for (const FeedbackRecord& old : log) taken.insert(old.feedback_id);
        std::size_t n = log.size() + 1;
        while (taken.count(fmt::format("F{:06d}", n))) ++n;
        f.feedback_id = fmt::format("F{:06d}", n);
    }
    f.timestamp = clock_();
    store_.append_feedback(f);
    return ok(201, to_json(f));
}

Response PlanningService::list_feedback(const Request& r)
{
    const std::string sid = query_value(r.query, "session_id");
    json records = json::array();
    for (const FeedbackRecord& f : store_.feedback()) {
        if (sid.empty() || f.session_id == sid) records.push_back(to_json(f));
    }
    return ok(200, {{"schema", "facedose.feedback_list/1"}, {"records", std::move(records)}});
}

} // namespace facedose::service
