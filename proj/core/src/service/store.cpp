#include "facedose/service.hpp"

#include "facedose/error.hpp"
#include "facedose/serialization.hpp"
#include "service_json.hpp"

#include <algorithm>
#include <fstream>

namespace facedose::service {

namespace fs = std::filesystem;
using io::json;

std::string_view origin_name(Origin o)
{
    return o == Origin::ai ? "ai" : "clinician";
}

json to_json(const HistoryEntry& h)
{
    return {{"timestamp", h.timestamp},
            {"alpha", io::to_json(h.alpha)},
            {"dose", io::to_json(h.dose)},
            {"residual", h.residual},
            {"origin", origin_name(h.origin)}};
}

json to_json(const FeedbackRecord& f)
{
    return {{"schema", "facedose.feedback/1"},
            {"feedback_id", f.feedback_id},
            {"session_id", f.session_id},
            {"u_new", io::to_json(f.u_new)},
            {"outcome", io::to_json(f.outcome)},
            {"accepted", f.accepted},
            {"note", f.note},
            {"timestamp", f.timestamp},
            {"late", f.late}};
}

FeedbackRecord feedback_from(const json& j, const std::string& path)
{
    io::require_schema(j, "facedose.feedback/1");
    FeedbackRecord f;
    f.feedback_id = io::string(io::at(j, "feedback_id", path), path + ".feedback_id");
    f.session_id = io::string(io::at(j, "session_id", path), path + ".session_id");
    f.u_new = io::dose_from(io::at(j, "u_new", path), path + ".u_new");
    f.outcome = io::metrics_from(io::at(j, "outcome", path), path + ".outcome");
    const json& accepted = io::at(j, "accepted", path);
    if (!accepted.is_boolean()) throw Error(Errc::format_error, "expected a boolean", path + ".accepted");
    f.accepted = accepted.get<bool>();
    f.note = io::string(io::at(j, "note", path), path + ".note");
    f.timestamp = io::integer(io::at(j, "timestamp", path), path + ".timestamp");
    const json& late = io::at(j, "late", path);
    if (!late.is_boolean()) throw Error(Errc::format_error, "expected a boolean", path + ".late");
    f.late = late.get<bool>();
    return f;
}

std::string save_session(const PlanningSession& s)
{
    json history = json::array();
    for (const HistoryEntry& h : s.history) history.push_back(to_json(h));
    const json j = {{"schema", "facedose.session/1"},
                    {"session_id", s.session_id},
                    {"patient_id", s.patient_id},
                    {"expression", s.expression},
                    {"w_src", io::to_json(s.w_src)},
                    {"basis", io::to_json(s.basis)},
                    {"m_src", io::to_json(s.m_src)},
                    {"closed", s.closed},
                    {"history", std::move(history)}};
    return j.dump(1) + "\n";
}

PlanningSession load_session(std::string_view text)
{
    const json j = io::parse(text);
    io::require_schema(j, "facedose.session/1");
    PlanningSession s;
    s.session_id = io::string(io::at(j, "session_id", "$"), "session_id");
    s.patient_id = io::string(io::at(j, "patient_id", "$"), "patient_id");
    s.expression = io::string(io::at(j, "expression", "$"), "expression");
    s.w_src = io::latent_from(io::at(j, "w_src", "$"), "w_src");
    s.basis = io::basis_from(io::at(j, "basis", "$"), "basis");
    s.m_src = io::metrics_from(io::at(j, "m_src", "$"), "m_src");
    const json& closed = io::at(j, "closed", "$");
    if (!closed.is_boolean()) throw Error(Errc::format_error, "expected a boolean", "closed");
    s.closed = closed.get<bool>();
    const json& history = io::array(io::at(j, "history", "$"), "history");
    for (std::size_t i = 0; i < history.size(); ++i) {
        const std::string p = "history[" + std::to_string(i) + "]";
        const json& h = history[i];
        HistoryEntry e;
        e.timestamp = io::integer(io::at(h, "timestamp", p), p + ".timestamp");
        e.alpha = io::alpha_from(io::at(h, "alpha", p), p + ".alpha");
        e.dose = io::dose_from(io::at(h, "dose", p), p + ".dose");
        e.residual = io::number(io::at(h, "residual", p), p + ".residual");
        const std::string origin = io::string(io::at(h, "origin", p), p + ".origin");
        if (origin != "ai" && origin != "clinician") {
            throw Error(Errc::format_error, "origin must be 'ai' or 'clinician'", p + ".origin");
        }
        e.origin = origin == "ai" ? Origin::ai : Origin::clinician;
        s.history.push_back(e);
    }
    if (s.history.empty()) throw Error(Errc::format_error, "a session has at least one history entry", "history");
    return s;
}

Store::Store(fs::path root) : root_(std::move(root))
{
    std::error_code ec;
    fs::create_directories(root_ / "patients", ec);
    fs::create_directories(root_ / "sessions", ec);
    if (ec) throw Error(Errc::io_error, "cannot create data directory: " + ec.message(), root_.string());
}

bool Store::add_patient(const PatientRecord& record)
{
    std::lock_guard lock(mutex_);
    const fs::path path = root_ / "patients" / (record.patient_id + ".json");
    if (fs::exists(path)) return false;
    write_text_file(path, save_record(record));
    return true;
}

std::optional<PatientRecord> Store::patient(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    const fs::path path = root_ / "patients" / (id + ".json");
    if (!fs::exists(path)) return std::nullopt;
    return load_record(read_text_file(path));
}

void Store::put_session(const PlanningSession& session)
{
    std::lock_guard lock(mutex_);
    write_text_file(root_ / "sessions" / (session.session_id + ".json"), save_session(session));
}

std::optional<PlanningSession> Store::session(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    const fs::path path = root_ / "sessions" / (id + ".json");
    if (!fs::exists(path)) return std::nullopt;
    return load_session(read_text_file(path));
}

std::vector<std::string> Store::session_ids() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(root_ / "sessions")) {
        if (e.path().extension() == ".json") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void Store::append_feedback(const FeedbackRecord& record)
{
    std::lock_guard lock(mutex_);
    std::ofstream out(root_ / "feedback.jsonl", std::ios::app | std::ios::binary);
    out << to_json(record).dump() << '\n';
    out.flush();
    if (!out) throw Error(Errc::io_error, "cannot append to the feedback log", (root_ / "feedback.jsonl").string());
}

std::vector<FeedbackRecord> Store::feedback() const
{
    std::lock_guard lock(mutex_);
    std::vector<FeedbackRecord> out;
    std::ifstream in(root_ / "feedback.jsonl", std::ios::binary);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        out.push_back(feedback_from(io::parse(line), "feedback.jsonl:" + std::to_string(n)));
    }
    return out;
}

} // namespace facedose::service
