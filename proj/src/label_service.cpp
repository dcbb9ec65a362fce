#include <logaction/hashing.hpp>
#include <logaction/label_service.hpp>

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>

namespace logaction {

using nlohmann::json;

namespace {

std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json metrics_json(const metrics_report& m)
{
    return {{"tp", m.tp},         {"fp", m.fp},         {"tn", m.tn},
            {"fn", m.fn},         {"precision", m.precision}, {"recall", m.recall},
            {"f1", m.f1},         {"round", m.round},   {"budget_fraction", m.budget_fraction},
            {"experiment_id", m.experiment_id}};
}

json query_json(const campaign& c, const query_item& q, std::size_t rank)
{
    const auto& w = c.target().train_windows.at(q.window_index);
    json j = {{"query_id", q.query_id},
              {"window_index", q.window_index},
              {"round", q.round},
              {"raw_lines", q.raw_lines},
              {"template_lines", q.template_lines},
              {"template_ids", w.events},
              {"free_energy", q.score.free_energy},
              {"uncertainty", q.score.uncertainty},
              {"e0", q.score.e0},
              {"e1", q.score.e1},
              {"p0", q.score.p0},
              {"p1", q.score.p1},
              {"uncertainty_rank", rank},
              {"status", to_string(q.status)}};
    j["label"] = q.label ? json(*q.label) : json(nullptr);
    j["labeler_id"] = q.labeler_id ? json(*q.labeler_id) : json(nullptr);
    return j;
}

// 0, 1, or -1 for "skip"; nullopt when the value is none of these.
std::optional<int> parse_label(const json& v)
{
    if (v.is_string() && v.get<std::string>() == "skip") return -1;
    if (v.is_number_integer()) {
        const auto x = v.get<long long>();
        if (x == 0 || x == 1) return static_cast<int>(x);
    }
    return std::nullopt;
}

std::optional<std::size_t> parse_id(const json& v)
{
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::size_t>(v.get<long long>());
    return std::nullopt;
}

} // namespace

label_service::label_service(campaign* c, std::filesystem::path state_dir)
    : campaign_(c), state_dir_(std::move(state_dir))
{
    if (campaign_) {
        for (const auto& q : campaign_->state().queries) {
            if (q.status == query_status::labeled) decided_[q.query_id] = *q.label;
            if (q.status == query_status::skipped) decided_[q.query_id] = -1;
        }
        ensure_open_round();
    }
    publish();
}

void label_service::ensure_open_round()
{
    campaign_->pretrain();
    if (!campaign_->finished() && !campaign_->state().round_open()) {
        campaign_->begin_round();
        persist(false);
    }
}

std::shared_ptr<const label_service::snapshot> label_service::current() const
{
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

void label_service::publish()
{
    auto s = std::make_shared<snapshot>();
    if (!campaign_) {
        s->digest = "";
        s->campaign = {{"active", false}};
    } else {
        const auto& c = *campaign_;
        const auto& st = c.state();
        s->digest = hex_digest(c.state_digest());
        s->round = st.round;
        const bool complete = c.finished() && !st.round_open();
        s->campaign = {{"active", true},
                       {"experiment_id", c.config().experiment_id},
                       {"config_digest", c.config().digest_hex()},
                       {"variant", variant_name(c.options())},
                       {"completed_rounds", st.round},
                       {"configured_rounds", c.config().rounds},
                       {"open_round", st.round_open() ? json(st.round + 1) : json(nullptr)},
                       {"status", complete ? "complete" : "labeling"},
                       {"round_quota", st.round_quota()},
                       {"pool_size", st.original_pool_size},
                       {"labeled", st.labeled_target.size()},
                       {"unlabeled", st.unlabeled_target.size()},
                       {"pending", st.pending_queries().size()},
                       {"uncertainty_order", c.config().uncertainty_order}};

        // rank 1 = least confident query of the round
        std::vector<const query_item*> by_u;
        for (const auto& q : st.queries) by_u.push_back(&q);
        std::stable_sort(by_u.begin(), by_u.end(),
                         [](const auto* a, const auto* b) { return a->score.uncertainty < b->score.uncertainty; });
        std::map<std::size_t, std::size_t> rank;
        for (std::size_t i = 0; i < by_u.size(); ++i) rank[by_u[i]->query_id] = i + 1;
        s->queries = json::array();
        for (const auto& q : st.queries) {
            if (q.status == query_status::pending) s->queries.push_back(query_json(c, q, rank[q.query_id]));
        }

        json history = json::array();
        json ledger = json::array();
        for (const auto& r : st.history) {
            history.push_back(metrics_json(r.metrics));
            const auto labeled = static_cast<std::size_t>(std::count_if(r.labels.begin(), r.labels.end(), [](int y) { return y >= 0; }));
            ledger.push_back({{"round", r.round}, {"selected", r.selected.size()}, {"labeled", labeled},
                              {"skipped", r.selected.size() - labeled}});
        }
        s->metrics = {{"current", st.history.empty() ? json(nullptr) : metrics_json(st.history.back().metrics)},
                      {"history", history},
                      {"ledger", ledger},
                      {"labels_used", st.labeled_target.size()},
                      {"labels_budgeted", st.round_quota() * static_cast<std::size_t>(c.config().rounds)}};
    }
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(s);
}

void label_service::persist(bool with_models)
{
    if (!state_dir_.empty() && campaign_) campaign_->save(state_dir_, with_models);
}

void label_service::audit(const audit_entry& e)
{
    std::lock_guard lock(audit_mutex_);
    audit_.push_back(e);
    if (state_dir_.empty()) return;
    std::filesystem::create_directories(state_dir_);
    std::ofstream out(state_dir_ / "audit.jsonl", std::ios::app);
    out << json{{"query_id", e.query_id}, {"label", e.label}, {"labeler_id", e.labeler_id},
                {"submitted_at", e.submitted_at}, {"outcome", e.outcome}}
               .dump()
        << '\n';
}

std::vector<audit_entry> label_service::audit_log() const
{
    std::lock_guard lock(audit_mutex_);
    return audit_;
}

service_reply label_service::reply(int status, json body) const
{
    const auto s = current();
    body["campaign_digest"] = s->digest;
    body["round"] = s->round;
    return {status, std::move(body)};
}

service_reply label_service::get_campaign() const
{
    auto body = current()->campaign;
    if (training_) body["status"] = "training";
    return reply(200, std::move(body));
}

service_reply label_service::get_queries() const
{
    if (!campaign_) return reply(409, {{"error", "no active campaign"}});
    return reply(200, {{"queries", current()->queries}});
}

service_reply label_service::get_metrics() const
{
    if (!campaign_) return reply(409, {{"error", "no active campaign"}});
    return reply(200, current()->metrics);
}

service_reply label_service::get_template(const std::string& id) const
{
    if (!campaign_) return reply(409, {{"error", "no active campaign"}});
    if (id.empty() || !std::all_of(id.begin(), id.end(), [](unsigned char ch) { return std::isdigit(ch); }) || id.size() > 18) {
        return reply(400, {{"error", "template id must be a non-negative integer"}});
    }
    const auto n = std::stoull(id);
    const auto& templates = campaign_->target().miner.templates();
    if (n >= templates.size()) return reply(404, {{"error", "unknown template " + id}});
    const auto& t = templates[n];
    return reply(200, {{"template_id", t.template_id},
                       {"text", t.text()},
                       {"tokens", t.tokens},
                       {"match_count", t.match_count},
                       {"example_line", t.example_line}});
}

service_reply label_service::submit_label(const json& body)
{
    if (!body.is_object() || !body.contains("query_id") || !body.contains("label") || !body.contains("labeler_id") ||
        !body.at("labeler_id").is_string()) {
        return reply(400, {{"error", "expected {query_id, label: 0|1|\"skip\", labeler_id}"}});
    }
    const auto id = parse_id(body.at("query_id"));
    const auto label = parse_label(body.at("label"));
    if (!id || !label) return reply(400, {{"error", "query_id must be a non-negative integer and label 0, 1, or \"skip\""}});
    audit_entry entry{*id, *label, body.at("labeler_id").get<std::string>(),
                      body.contains("submitted_at") && body.at("submitted_at").is_string() ? body.at("submitted_at").get<std::string>() : utc_now(),
                      ""};
    if (!campaign_) {
        entry.outcome = "no_campaign";
        audit(entry);
        return reply(409, {{"error", "no active campaign"}});
    }
    if (training_) {
        entry.outcome = "rejected_training";
        audit(entry);
        return reply(409, {{"error", "training"}, {"status", "training"}});
    }

    std::lock_guard lock(write_mutex_);
    if (auto it = decided_.find(*id); it != decided_.end()) {
        entry.outcome = "duplicate";
        audit(entry);
        json prior = it->second < 0 ? json("skip") : json(it->second);
        return reply(200, {{"outcome", "duplicate"}, {"query_id", *id}, {"label", prior}});
    }
    const auto outcome = campaign_->submit(*id, *label, entry.labeler_id, "human");
    if (outcome == submit_outcome::unknown_query) {
        entry.outcome = "unknown_query";
        audit(entry);
        return reply(404, {{"outcome", "unknown_query"}, {"query_id", *id}});
    }
    decided_[*id] = *label;
    entry.outcome = outcome == submit_outcome::accepted ? "accepted" : "duplicate";
    audit(entry);
    persist(false);
    publish();
    json shown = *label < 0 ? json("skip") : json(*label);
    return reply(201, {{"outcome", entry.outcome}, {"query_id", *id}, {"label", shown}});
}

service_reply label_service::advance_round()
{
    if (!campaign_) return reply(409, {{"error", "no active campaign"}});
    if (training_) return reply(409, {{"error", "training"}, {"status", "training"}});
    std::lock_guard lock(write_mutex_);
    if (campaign_->finished() && !campaign_->state().round_open()) {
        return reply(200, {{"complete", true}, {"metrics", metrics_json(campaign_->state().history.back().metrics)}});
    }
    const auto pending = campaign_->state().pending_queries();
    if (!pending.empty()) return reply(409, {{"error", "pending queries remain"}, {"pending", pending}});

    training_ = true;
    try {
        campaign_->complete_round();
        if (!campaign_->finished()) campaign_->begin_round();
    } catch (const std::exception& e) {
        training_ = false;
        publish();
        return reply(409, {{"error", e.what()}});
    }
    persist(true);
    publish();
    training_ = false;
    const auto& last = campaign_->state().history.back();
    return reply(200, {{"complete", campaign_->finished()}, {"completed_round", last.round}, {"metrics", metrics_json(last.metrics)}});
}

service_reply label_service::relabel(const json& body)
{
    if (!body.is_object() || !body.contains("query_id") || !body.contains("label") || !body.contains("labeler_id") ||
        !body.at("labeler_id").is_string()) {
        return reply(400, {{"error", "expected {query_id, label: 0|1, labeler_id}"}});
    }
    const auto id = parse_id(body.at("query_id"));
    const auto label = parse_label(body.at("label"));
    if (!id || !label || *label < 0) return reply(400, {{"error", "relabel needs a query_id and label 0 or 1"}});
    if (!campaign_) return reply(409, {{"error", "no active campaign"}});
    if (training_) return reply(409, {{"error", "training"}, {"status", "training"}});
    audit_entry entry{*id, *label, body.at("labeler_id").get<std::string>(), utc_now(), ""};

    std::lock_guard lock(write_mutex_);
    const auto& qs = campaign_->state().queries;
    const bool in_round = std::any_of(qs.begin(), qs.end(), [&](const query_item& q) { return q.query_id == *id; });
    if (!in_round) {
        const bool past = decided_.count(*id) > 0;
        entry.outcome = "relabel_rejected";
        audit(entry);
        if (past) return reply(409, {{"error", "query belongs to a round that has already advanced"}});
        return reply(404, {{"error", "unknown query"}});
    }
    if (!campaign_->relabel(*id, *label)) {
        entry.outcome = "relabel_rejected";
        audit(entry);
        return reply(409, {{"error", "only labeled queries can be relabeled"}});
    }
    decided_[*id] = *label;
    entry.outcome = "relabel";
    audit(entry);
    persist(false);
    publish();
    return reply(200, {{"outcome", "relabeled"}, {"query_id", *id}, {"label", *label}});
}

label_server::label_server(label_service& service) : service_(service), server_(std::make_unique<httplib::Server>())
{
    auto send = [](httplib::Response& res, const service_reply& r) {
        res.status = r.status;
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_content(r.body.dump(), "application/json");
    };
    auto with_body = [send](auto fn) {
        return [send, fn](const httplib::Request& req, httplib::Response& res) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::exception&) {
                send(res, {400, {{"error", "request body is not valid JSON"}}});
                return;
            }
            send(res, fn(body));
        };
    };
    auto& s = *server_;
    s.Get("/api/campaign", [this, send](const httplib::Request&, httplib::Response& res) { send(res, service_.get_campaign()); });
    s.Get("/api/queries", [this, send](const httplib::Request&, httplib::Response& res) { send(res, service_.get_queries()); });
    s.Get("/api/metrics", [this, send](const httplib::Request&, httplib::Response& res) { send(res, service_.get_metrics()); });
    s.Get(R"(/api/templates/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service_.get_template(req.matches[1]));
    });
    s.Post("/api/labels", with_body([this](const json& b) { return service_.submit_label(b); }));
    s.Post("/api/admin/relabel", with_body([this](const json& b) { return service_.relabel(b); }));
    s.Post("/api/rounds/advance", [this, send](const httplib::Request&, httplib::Response& res) { send(res, service_.advance_round()); });
    s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

label_server::~label_server()
{
    stop();
}

int label_server::start(const std::string& host, int port)
{
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::make_unique<std::thread>([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

bool label_server::listen(const std::string& host, int port)
{
    return server_->listen(host, port);
}

void label_server::stop()
{
    if (server_) server_->stop();
    if (thread_ && thread_->joinable()) thread_->join();
    thread_.reset();
}

} // namespace logaction
