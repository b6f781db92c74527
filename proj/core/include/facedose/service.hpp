#pragma once

#include "facedose/axes.hpp"
#include "facedose/cohort.hpp"
#include "facedose/doseresponse.hpp"
#include "facedose/faceworld.hpp"
#include "facedose/muscle_map.hpp"
#include "facedose/region_table.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace facedose::service {

enum class Origin { ai, clinician };

struct HistoryEntry
{
    std::int64_t timestamp = 0; ///< milliseconds since the epoch
    AlphaVector alpha;
    DoseVector dose;
    double residual = 0.0; ///< |f_gen(dose) - alpha|^2
    Origin origin = Origin::ai;
};

/// One planning session. The current state is the last history entry.
struct PlanningSession
{
    std::string session_id;
    std::string patient_id;
    std::string expression;
    LatentCode w_src; ///< the source face is decode(w_src), aligned
    AxisBasis basis;
    MetricVector m_src;
    std::vector<HistoryEntry> history;
    bool closed = false;

    const HistoryEntry& current() const { return history.back(); }
};

struct FeedbackRecord
{
    std::string feedback_id;
    std::string session_id;
    DoseVector u_new;
    MetricVector outcome;
    bool accepted = false;
    std::string note;
    std::int64_t timestamp = 0;
    bool late = false; ///< arrived after the session was closed
};

/// File-backed persistence: patients/<id>.json, sessions/<id>.json and an
/// append-only feedback.jsonl under one root directory.
class Store
{
public:
    explicit Store(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    /// False if the id is taken.
    bool add_patient(const PatientRecord& record);
    std::optional<PatientRecord> patient(const std::string& id) const;

    void put_session(const PlanningSession& session);
    std::optional<PlanningSession> session(const std::string& id) const;
    std::vector<std::string> session_ids() const;

    void append_feedback(const FeedbackRecord& record);
    std::vector<FeedbackRecord> feedback() const;

private:
    std::filesystem::path root_;
    mutable std::mutex mutex_;
};

std::string save_session(const PlanningSession& session);
PlanningSession load_session(std::string_view text);

struct Options
{
    std::filesystem::path data_dir = "facedose-data";
    /// Approach A bundle; sessions answer 409 without one.
    std::optional<std::filesystem::path> model_path;
    /// Saved synthetic world; the default world when absent.
    std::optional<std::filesystem::path> world_path;
    std::string host = "127.0.0.1";
    int port = 8080;

    /// FACEDOSE_DATA_DIR, FACEDOSE_MODEL, FACEDOSE_WORLD and FACEDOSE_BIND
    /// ("host:port") override the defaults.
    static Options from_env();
};

struct Request
{
    std::string method;
    std::string path;  ///< without the query string
    std::string query; ///< raw, without '?'
    std::string body;
};

struct Response
{
    int status = 200;
    std::string body;
};

/// Milliseconds since the epoch.
using Clock = std::function<std::int64_t()>;

/// The planning API, independent of any transport. Thread-safe: requests on
/// one session are serialized, different sessions proceed in parallel.
class PlanningService
{
public:
    /// Patients, sessions and feedback live under data_dir.
    PlanningService(std::shared_ptr<const Generator> world, std::optional<ApproachABundle> model,
                    const std::filesystem::path& data_dir, Clock clock = {});

    /// Loads the world and model named by the options.
    static std::unique_ptr<PlanningService> from_options(const Options& options);

    Response handle(const Request& request);

    bool has_model() const { return model_.has_value(); }

private:
    Response create_patient(const Request& r);
    Response get_patient(const std::string& id);
    Response create_session(const std::string& patient_id, const Request& r);
    Response get_session(const std::string& id);
    Response adjust(const std::string& id, const Request& r);
    Response simulate(const std::string& id, const Request& r);
    Response close(const std::string& id);
    Response add_feedback(const std::string& session_id, const Request& r);
    Response list_feedback(const Request& r);

    std::shared_ptr<std::mutex> session_lock(const std::string& id);
    PlanningSession require_session(const std::string& id) const;
    std::int64_t next_timestamp(const PlanningSession& session) const;
    std::string session_view(const PlanningSession& session) const;
    InverseResult invert(const PlanningSession& session, const AlphaVector& alpha) const;

    std::shared_ptr<const Generator> world_;
    std::optional<ApproachABundle> model_;
    Store store_;
    Clock clock_;
    const RegionIndexTable& table_;
    RoiSet masks_;
    DoseBounds bounds_;

    std::mutex locks_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> locks_;
    std::mutex create_mutex_;
    std::uint64_t next_session_ = 1;
};

/// Serves `service` over HTTP until stop() or a signal. Blocking.
class HttpServer
{
public:
    explicit HttpServer(PlanningService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Port 0 binds any free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace facedose::service
