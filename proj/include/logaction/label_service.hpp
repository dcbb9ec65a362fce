#pragma once
#include <logaction/campaign.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace logaction {

// Result of a service call: an HTTP-style status and a JSON body. Every body
// carries "campaign_digest" and "round".
struct service_reply
{
    int status = 200;
    nlohmann::json body;
};

struct audit_entry
{
    std::size_t query_id = 0;
    int label = 0; // -1 = skip
    std::string labeler_id;
    std::string submitted_at;
    std::string outcome; // accepted, duplicate, unknown_query, relabel, relabel_rejected
};

/// Interactive oracle over one campaign. Reads are answered from a snapshot
/// published after every mutation; mutations are serialized. While a round
/// advance fine-tunes the models, reads keep serving the pre-advance snapshot
/// and writes are refused with a "training" conflict.
///
/// Labels are first-final: the first submission for a query decides it and
/// later ones are acknowledged as duplicates. Every attempt is audited.
class label_service
{
public:
    /// state_dir, when non-empty, receives state.json after each mutation,
    /// model checkpoints after each advance, and an audit.jsonl trail.
    explicit label_service(campaign* c, std::filesystem::path state_dir = {});

    service_reply get_campaign() const;
    service_reply get_queries() const;
    service_reply submit_label(const nlohmann::json& body);
    service_reply advance_round();
    service_reply get_metrics() const;
    service_reply get_template(const std::string& id) const;
    service_reply relabel(const nlohmann::json& body);

    std::vector<audit_entry> audit_log() const;
    bool training() const { return training_; }

private:
    struct snapshot
    {
        std::string digest;
        std::size_t round = 0;
        nlohmann::json campaign;
        nlohmann::json queries;
        nlohmann::json metrics;
    };

    void ensure_open_round();
    void publish();
    void persist(bool with_models);
    void audit(const audit_entry& e);
    service_reply reply(int status, nlohmann::json body) const;
    std::shared_ptr<const snapshot> current() const;

    campaign* campaign_;
    std::filesystem::path state_dir_;
    mutable std::mutex write_mutex_;
    mutable std::mutex snapshot_mutex_;
    mutable std::mutex audit_mutex_;
    std::shared_ptr<const snapshot> snapshot_;
    std::atomic<bool> training_{false};
    std::vector<audit_entry> audit_;
    std::map<std::size_t, int> decided_; // every query ever decided -> label (-1 skip)
};

/// HTTP front end for a label_service (JSON bodies):
///   GET  /api/campaign           GET  /api/queries
///   POST /api/labels             POST /api/rounds/advance
///   GET  /api/metrics            GET  /api/templates/{id}
///   POST /api/admin/relabel
class label_server
{
public:
    explicit label_server(label_service& service);
    ~label_server();

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    bool listen(const std::string& host, int port);
    void stop();

private:
    label_service& service_;
    std::unique_ptr<httplib::Server> server_;
    std::unique_ptr<std::thread> thread_;
};

} // namespace logaction
