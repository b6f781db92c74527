#pragma once
// The planning API contract as a list of named checks, runnable against any
// transport (in-process handler or HTTP). Used by the unit tests and by the
// acceptance run.

#include <facedose/cohort.hpp>
#include <facedose/muscle_map.hpp>
#include <facedose/serialization.hpp>
#include <facedose/service.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace facedose::testing {

using Transport = std::function<service::Response(const service::Request&)>;

struct Check
{
    std::string name;
    bool pass = false;
    std::string detail;
};

class ContractRun
{
public:
    ContractRun(Transport with_model, Transport without_model)
        : api_(std::move(with_model)), bare_(std::move(without_model))
    {
    }

    service::Response call(const std::string& method, const std::string& target, const std::string& body = {})
    {
        return call_on(api_, method, target, body);
    }

    static service::Response call_on(const Transport& t, const std::string& method, const std::string& target,
                                     const std::string& body)
    {
        service::Request r;
        r.method = method;
        const auto q = target.find('?');
        r.path = target.substr(0, q);
        if (q != std::string::npos) r.query = target.substr(q + 1);
        r.body = body;
        return t(r);
    }

    void check(const std::string& name, bool pass, const std::string& detail = {})
    {
        checks_.push_back({name, pass, pass ? std::string() : detail});
    }

    std::vector<Check> run(const PatientRecord& patient, const DoseVector& known_dose);

    const Transport& bare() const { return bare_; }

private:
    Transport api_;
    Transport bare_;
    std::vector<Check> checks_;
};

namespace contract_detail {

using nlohmann::json;

inline json parse(const service::Response& r)
{
    return json::parse(r.body, nullptr, false);
}

inline bool is_envelope(const service::Response& r, int status, const std::string& code)
{
    const json j = parse(r);
    return r.status == status && j.is_object() && j.contains("code") && j.contains("message") &&
           j.contains("field") && j["code"] == code;
}

inline json dose_json(const DoseVector& u)
{
    return json(std::vector<double>(u.units.begin(), u.units.end()));
}

inline double metric_gap(const json& a, const json& b)
{
    double worst = 0.0;
    for (auto it = a.begin(); it != a.end(); ++it) {
        const double x = it.value().get<double>(), y = b.at(it.key()).get<double>();
        worst = std::max(worst, std::abs(x - y) / std::max(std::abs(y), 1e-9));
    }
    return worst;
}

inline double metric_abs_gap(const json& a, const json& b)
{
    double worst = 0.0;
    for (auto it = a.begin(); it != a.end(); ++it) {
        worst = std::max(worst, std::abs(it.value().get<double>() - b.at(it.key()).get<double>()));
    }
    return worst;
}

} // namespace contract_detail

inline std::vector<Check> ContractRun::run(const PatientRecord& patient, const DoseVector& known_dose)
{
    using namespace contract_detail;
    checks_.clear();
    const std::string pid = patient.patient_id;

    const auto health = call("GET", "/health");
    check("health answers", health.status == 200 && parse(health)["status"] == "ok", health.body);

    // Patients
    const auto created = call("POST", "/patients", save_record(patient));
    check("create patient -> 201", created.status == 201 && parse(created)["patient_id"] == pid, created.body);
    json short_record = json::parse(save_record(patient));
    short_record["patient_id"] = pid + "-short";
    short_record["sessions"][0]["points"].erase(0);
    const auto short_resp = call("POST", "/patients", short_record.dump());
    check("467 landmarks -> 400 naming the session",
          short_resp.status == 400 && parse(short_resp)["field"].is_string() &&
              parse(short_resp)["field"].get<std::string>().find("sessions[0]") != std::string::npos,
          short_resp.body);
    const auto dup = call("POST", "/patients", save_record(patient));
    check("duplicate patient -> 409", is_envelope(dup, 409, "Conflict"), dup.body);
    const auto got = call("GET", "/patients/" + pid);
    check("get patient", got.status == 200 && parse(got)["patient_id"] == pid, got.body);
    const auto missing = call("GET", "/patients/NOPE");
    check("unknown patient -> 404", is_envelope(missing, 404, "NotFound"), missing.body);
    const auto garbage = call("POST", "/patients", "{\"schema\": 3");
    check("malformed patient body -> 400", garbage.status == 400 && parse(garbage).contains("code"), garbage.body);

    // Sessions
    const auto no_patient = call("POST", "/patients/NOPE/sessions", "{}");
    check("session for unknown patient -> 404", is_envelope(no_patient, 404, "NotFound"), no_patient.body);
    if (bare_) {
        (void)call_on(bare_, "POST", "/patients", save_record(patient));
        const auto no_model = call_on(bare_, "POST", "/patients/" + pid + "/sessions", "{}");
        check("session without model -> 409", is_envelope(no_model, 409, "NoModel"), no_model.body);
    }
    const auto s1 = call("POST", "/patients/" + pid + "/sessions", json{{"dose", dose_json({})}}.dump());
    const json v1 = parse(s1);
    check("create session -> 201", s1.status == 201 && v1["schema"] == "facedose.session_view/1", s1.body);
    if (s1.status != 201) return checks_;
    const std::string sid = v1["session_id"];
    double max_alpha = 0.0;
    for (const json& a : v1["current"]["alpha"]) max_alpha = std::max(max_alpha, std::abs(a.get<double>()));
    check("zero dose starts near alpha 0", max_alpha <= 0.05, v1["current"]["alpha"].dump());
    check("zero dose simulation near the source", metric_abs_gap(v1["metrics"], v1["m_src"]) <= 0.05,
          v1["metrics"].dump() + " vs " + v1["m_src"].dump());

    const auto s2 = call("POST", "/patients/" + pid + "/sessions", json{{"dose", dose_json({})}}.dump());
    const std::string sid2 = parse(s2)["session_id"];
    const std::string probe = json{{"dose", dose_json(known_dose)}}.dump();
    const auto p1 = call("POST", "/sessions/" + sid + "/simulate", probe);
    const auto p2 = call("POST", "/sessions/" + sid2 + "/simulate", probe);
    check("two sessions are independent and deterministic",
          s2.status == 201 && sid2 != sid && p1.status == 200 && p1.body == p2.body, p1.body.substr(0, 200));
    const auto view = call("GET", "/sessions/" + sid);
    check("get session", view.status == 200 && parse(view)["session_id"] == sid, view.body.substr(0, 200));
    check("unknown session -> 404", is_envelope(call("GET", "/sessions/S999999"), 404, "NotFound"));
    check("malformed session id -> 404", call("GET", "/sessions/..%2Fetc").status == 404);

    // Simulate
    const auto z1 = call("POST", "/sessions/" + sid + "/simulate", json{{"dose", dose_json({})}}.dump());
    const auto z2 = call("POST", "/sessions/" + sid + "/simulate", json{{"dose", dose_json({})}}.dump());
    check("simulate repeated -> identical response", z1.status == 200 && z1.body == z2.body, z1.body.substr(0, 200));
    check("simulate zero dose -> anchor alpha", z1.status == 200 && parse(z1)["alpha"] == v1["current"]["alpha"],
          z1.body.substr(0, 200));
    DoseVector over;
    over[4] = 11.0;
    const auto bad_dose = call("POST", "/sessions/" + sid + "/simulate", json{{"dose", dose_json(over)}}.dump());
    const std::string label = MuscleMap::standard().labels[4];
    check("out-of-bounds dose -> 422 naming the muscle",
          is_envelope(bad_dose, 422, "OutOfBounds") && parse(bad_dose)["field"] == "dose[4]" &&
              parse(bad_dose)["message"].get<std::string>().find(label) != std::string::npos,
          bad_dose.body);
    const auto short_dose = call("POST", "/sessions/" + sid + "/simulate", R"({"dose": [1, 2, 3]})");
    check("dose of wrong length -> 400", short_dose.status == 400, short_dose.body);

    // Adjust
    const json before = parse(call("GET", "/sessions/" + sid));
    const json cur = before["current"];
    const auto noop = call("POST", "/sessions/" + sid + "/adjust", json{{"alpha", cur["alpha"]}}.dump());
    const json nj = parse(noop);
    check("no-op adjust keeps dose and residual",
          noop.status == 200 && nj["dose_estimate"] == cur["dose"] && nj["residual"] == cur["residual"] &&
              nj["landmarks"] == before["landmarks"],
          noop.body.substr(0, 300));
    const auto zero = call("POST", "/sessions/" + sid + "/adjust", json{{"alpha", json::array({0, 0, 0, 0, 0, 0})}}.dump());
    check("adjust to alpha 0 reproduces m_src", zero.status == 200 && metric_abs_gap(parse(zero)["metrics"], before["m_src"]) <= 1e-9,
          zero.body.substr(0, 300));
    const auto oob = call("POST", "/sessions/" + sid + "/adjust", json{{"alpha", json::array({0, 0, 0, 2.0, 0, 0})}}.dump());
    check("out-of-range alpha -> 422 naming the component",
          is_envelope(oob, 422, "OutOfBounds") && parse(oob)["field"] == "alpha[3]" &&
              parse(oob)["message"].get<std::string>().find(std::string(region_name(Region::eye_right))) != std::string::npos,
          oob.body);
    const json a1 = json::array({0.3, 0.1, 0.6, 0.2, 0.0, 0.4});
    const json a2 = json::array({0.9, 0.5, 0.1, 0.0, 0.7, 0.2});
    const auto first = call("POST", "/sessions/" + sid + "/adjust", json{{"alpha", a1}}.dump());
    (void)call("POST", "/sessions/" + sid + "/adjust", json{{"alpha", a2}}.dump());
    const auto back = call("POST", "/sessions/" + sid + "/adjust", json{{"alpha", a1}}.dump());
    check("adjust back restores metrics bitwise",
          first.status == 200 && parse(first)["metrics"] == parse(back)["metrics"] &&
              parse(first)["landmarks"] == parse(back)["landmarks"]);

    // Round trip: the dose found for a forward-pass alpha simulates to nearly the same face.
    const json forward = parse(p1);
    const auto inv = call("POST", "/sessions/" + sid + "/adjust", json{{"alpha", forward["alpha"]}}.dump());
    const json ij = parse(inv);
    bool in_bounds = inv.status == 200;
    if (in_bounds) {
        for (const json& u : ij["dose_estimate"]) in_bounds = in_bounds && u.get<double>() >= 0.0 && u.get<double>() <= kDefaultDoseBound;
    }
    const auto resim = in_bounds ? call("POST", "/sessions/" + sid + "/simulate", json{{"dose", ij["dose_estimate"]}}.dump())
                                 : service::Response{500, "{}"};
    const double gap = resim.status == 200 ? metric_gap(parse(resim)["metrics"], forward["metrics"]) : INFINITY;
    check("adjust round trip within 5%", in_bounds && gap <= 0.05, "worst relative gap " + std::to_string(gap));

    const json hist = parse(call("GET", "/sessions/" + sid));
    bool ordered = true;
    for (std::size_t i = 1; i < hist["history"].size(); ++i) {
        ordered = ordered && hist["history"][i]["timestamp"].get<std::int64_t>() >
                                 hist["history"][i - 1]["timestamp"].get<std::int64_t>();
    }
    check("history strictly time ordered", ordered && hist["history"].size() >= 8);
    check("current mirrors the last history entry", hist["current"] == hist["history"].back());
    int by_clinician = 0;
    for (const json& h : hist["history"]) by_clinician += h["origin"] == "clinician";
    check("each adjust appends a clinician entry", by_clinician == 6, std::to_string(by_clinician));
    check("simulate appends as ai", hist["history"][1]["origin"] == "ai");

    // Feedback
    const auto fb = call("POST", "/sessions/" + sid + "/feedback", R"({"accepted": true, "note": "looks right"})");
    const json fj = parse(fb);
    check("feedback -> 201", fb.status == 201 && fj["session_id"] == sid && fj["late"] == false, fb.body);
    const auto listed = call("GET", "/feedback?session_id=" + sid);
    bool visible = false;
    const json listed_json = parse(listed);
    for (const json& r : listed_json["records"]) visible = visible || (r["feedback_id"] == fj["feedback_id"] && r["note"] == "looks right");
    check("feedback visible in GET /feedback", listed.status == 200 && visible, listed.body.substr(0, 300));
    check("malformed feedback -> 400", call("POST", "/sessions/" + sid + "/feedback", "{oops").status == 400);
    check("feedback without accepted -> 400",
          is_envelope(call("POST", "/sessions/" + sid + "/feedback", R"({"note": "x"})"), 400, "FormatError"));
    check("feedback for unknown session -> 404",
          call("POST", "/sessions/S999999/feedback", R"({"accepted": false})").status == 404);
    const std::string idem = R"({"accepted": false, "note": "retry", "feedback_id": "client-42"})";
    const auto once = call("POST", "/sessions/" + sid + "/feedback", idem);
    const auto twice = call("POST", "/sessions/" + sid + "/feedback", idem);
    int copies = 0;
    const json all_feedback = parse(call("GET", "/feedback"));
    for (const json& r : all_feedback["records"]) copies += r["feedback_id"] == "client-42";
    check("feedback idempotent by id", once.status == 201 && twice.status == 200 && once.body == twice.body && copies == 1);
    const auto alias = call("POST", "/feedback", json{{"session_id", sid2}, {"accepted", true}}.dump());
    check("POST /feedback with session_id", alias.status == 201 && parse(alias)["session_id"] == sid2, alias.body);

    // Closing
    const auto closed = call("POST", "/sessions/" + sid + "/close");
    check("close session", closed.status == 200 && parse(closed)["closed"] == true, closed.body.substr(0, 200));
    const auto late = call("POST", "/sessions/" + sid + "/feedback", R"({"accepted": true})");
    check("late feedback accepted with flag", late.status == 201 && parse(late)["late"] == true, late.body);
    check("closed session refuses adjust",
          is_envelope(call("POST", "/sessions/" + sid + "/adjust", json{{"alpha", a1}}.dump()), 409, "SessionClosed"));

    // Routing
    check("wrong method -> 405", call("DELETE", "/sessions/" + sid).status == 405);
    check("unknown route -> 404", is_envelope(call("GET", "/nowhere"), 404, "NotFound"));
    return checks_;
}

/// Median and 95th percentile of adjust latency over `n` random slider commits.
inline std::pair<double, double> adjust_latency_ms(ContractRun& run, const std::string& patient_id, int n,
                                                   std::uint64_t seed)
{
    const auto s = run.call("POST", "/patients/" + patient_id + "/sessions", "{}");
    const std::string sid = nlohmann::json::parse(s.body)["session_id"];
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 1.2);
    std::vector<double> ms;
    for (int i = 0; i < n; ++i) {
        nlohmann::json alpha = nlohmann::json::array();
        for (int k = 0; k < 6; ++k) alpha.push_back(d(rng));
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = run.call("POST", "/sessions/" + sid + "/adjust", nlohmann::json{{"alpha", alpha}}.dump());
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        if (r.status != 200) return {INFINITY, INFINITY};
    }
    std::sort(ms.begin(), ms.end());
    const auto at = [&](double q) { return ms[std::min(ms.size() - 1, static_cast<std::size_t>(std::ceil(q * ms.size())) - 1)]; };
    return {at(0.5), at(0.95)};
}

} // namespace facedose::testing
