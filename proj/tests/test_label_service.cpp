#include "support.hpp"

#include <logaction/hashing.hpp>
#include <logaction/label_service.hpp>

#include <doctest.h>
#include <httplib.h>

#include <fstream>
#include <thread>

using namespace logaction;
using nlohmann::json;

namespace {

struct fixture_data
{
    experiment_config cfg = test::tiny_config();
    system_pair data = test::tiny_pair(cfg);
};

const fixture_data& shared()
{
    static const fixture_data f;
    return f;
}

json label_body(std::size_t id, json label, const std::string& who = "ann")
{
    return {{"query_id", id}, {"label", std::move(label)}, {"labeler_id", who}};
}

int truth(const campaign& c, const json& q)
{
    return c.target().train_windows.at(q.at("window_index").get<std::size_t>()).label;
}

} // namespace

TEST_CASE("no campaign means conflict")
{
    label_service s(nullptr);
    CHECK(s.get_queries().status == 409);
    CHECK(s.get_metrics().status == 409);
    CHECK(s.advance_round().status == 409);
    CHECK(s.submit_label(label_body(0, 1)).status == 409);
    CHECK(s.get_campaign().body.at("active") == false);
}

TEST_CASE("queries, labels, and round advance")
{
    const auto& f = shared();
    campaign c(f.data.source, f.data.target, f.cfg);
    label_service s(&c);
    const auto quota = c.state().round_quota();
    REQUIRE(quota >= 3);

    auto q = s.get_queries();
    CHECK(q.status == 200);
    auto items = q.body.at("queries");
    CHECK(items.size() == quota);
    CHECK(q.body.at("round") == 0);
    CHECK(q.body.at("campaign_digest") == hex_digest(c.state_digest()));
    CHECK(items[0].at("template_ids").size() == static_cast<std::size_t>(f.cfg.window_size));
    CHECK(items[0].at("raw_lines").size() == static_cast<std::size_t>(f.cfg.window_size));
    for (const auto* k : {"free_energy", "uncertainty", "p0", "p1", "template_lines", "uncertainty_rank"}) CHECK(items[0].contains(k));

    // metrics before any round report the transfer baseline
    auto m = s.get_metrics();
    CHECK(m.body.at("history").size() == 1);
    CHECK(m.body.at("ledger").size() == 1);
    CHECK(m.body.at("current").at("round") == 0);

    const auto id0 = items[0].at("query_id").get<std::size_t>();
    const auto id1 = items[1].at("query_id").get<std::size_t>();
    CHECK(s.submit_label(label_body(id0, truth(c, items[0]))).status == 201);
    CHECK(s.submit_label(label_body(id1, truth(c, items[1]))).status == 201);
    CHECK(s.get_queries().body.at("queries").size() == quota - 2);

    // first label is final
    const auto dup = s.submit_label(label_body(id0, 1 - truth(c, items[0]), "bob"));
    CHECK(dup.status == 200);
    CHECK(dup.body.at("outcome") == "duplicate");
    CHECK(dup.body.at("label") == truth(c, items[0]));

    CHECK(s.submit_label(label_body(123456, 0)).status == 404);
    CHECK(s.submit_label(json{{"query_id", id0}}).status == 400);
    CHECK(s.submit_label(label_body(id0, 7)).status == 400);
    CHECK(s.submit_label(json::array()).status == 400);

    // pending items block the advance and are named
    const auto blocked = s.advance_round();
    CHECK(blocked.status == 409);
    CHECK(blocked.body.at("pending").size() == quota - 2);

    // relabel in the open round
    CHECK(s.relabel(label_body(id1, 1 - truth(c, items[1]))).status == 200);
    CHECK(s.relabel(label_body(id1, truth(c, items[1]))).status == 200);
    CHECK(s.relabel(label_body(424242, 0)).status == 404);

    for (std::size_t i = 2; i < items.size(); ++i) {
        const json label = i == 2 ? json("skip") : json(truth(c, items[i]));
        CHECK(s.submit_label(label_body(items[i].at("query_id"), label)).status == 201);
    }
    const auto adv = s.advance_round();
    CHECK(adv.status == 200);
    CHECK(adv.body.at("completed_round") == 1);
    CHECK(adv.body.at("round") == 1);
    CHECK(s.get_metrics().body.at("ledger").size() == 2);
    CHECK(s.get_metrics().body.at("history").size() == c.state().history.size());

    // the advanced round is closed to relabeling
    CHECK(s.relabel(label_body(id1, 0)).status == 409);
    const auto again = s.submit_label(label_body(id0, 0));
    CHECK(again.status == 200);
    CHECK(again.body.at("outcome") == "duplicate");

    const auto round2 = s.get_queries().body.at("queries");
    for (const auto& item : round2) CHECK(s.submit_label(label_body(item.at("query_id"), truth(c, item))).status == 201);
    CHECK(s.advance_round().status == 200);
    const auto done = s.advance_round();
    CHECK(done.status == 200);
    CHECK(done.body.at("complete") == true);
    CHECK(s.get_campaign().body.at("status") == "complete");

    // every attempt is audited
    std::size_t attempts = 0;
    for (const auto& e : s.audit_log()) attempts += e.outcome != "relabel" && e.outcome != "relabel_rejected";
    CHECK(attempts >= quota * 2 + 3);
}

TEST_CASE("templates endpoint")
{
    const auto& f = shared();
    campaign c(f.data.source, f.data.target, f.cfg);
    label_service s(&c);
    const auto ok = s.get_template("0");
    CHECK(ok.status == 200);
    CHECK(ok.body.at("text") == c.target().miner.at(0).text());
    CHECK(s.get_template("abc").status == 400);
    CHECK(s.get_template("-1").status == 400);
    CHECK(s.get_template("999999").status == 404);
}

TEST_CASE("concurrent submissions keep one effective label per query")
{
    const auto& f = shared();
    test::temp_dir dir("service-concurrency");
    campaign c(f.data.source, f.data.target, f.cfg);
    label_service s(&c, dir.path());
    const auto items = s.get_queries().body.at("queries");
    constexpr int threads = 4;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (const auto& q : items) s.submit_label(label_body(q.at("query_id"), t % 2, "annotator-" + std::to_string(t)));
        });
    }
    for (auto& th : pool) th.join();

    CHECK(s.audit_log().size() == items.size() * threads);
    std::size_t accepted = 0;
    for (const auto& e : s.audit_log()) accepted += e.outcome == "accepted";
    CHECK(accepted == items.size());
    for (const auto& q : c.state().queries) {
        CHECK(q.status == query_status::labeled);
        std::size_t winners = 0;
        for (const auto& e : s.audit_log()) {
            if (e.query_id == q.query_id && e.outcome == "accepted") {
                ++winners;
                CHECK(e.label == *q.label);
            }
        }
        CHECK(winners == 1);
    }
    std::ifstream audit(dir.path() / "audit.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(audit, line);) ++lines;
    CHECK(lines == items.size() * threads);
}

TEST_CASE("a campaign driven over HTTP matches the batch run")
{
    const auto& f = shared();
    campaign batch(f.data.source, f.data.target, f.cfg);
    ground_truth_oracle o(batch.target());
    REQUIRE(batch.run(o));

    test::temp_dir dir("service-http");
    campaign live(f.data.source, f.data.target, f.cfg);
    label_service service(&live, dir.path());
    label_server server(service);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);

    auto campaign_view = json::parse(client.Get("/api/campaign")->body);
    CHECK(campaign_view.at("status") == "labeling");
    CHECK(client.Get("/api/templates/zero")->status == 400);
    CHECK(client.Post("/api/labels", "{not json", "application/json")->status == 400);

    while (true) {
        const auto res = client.Get("/api/queries");
        REQUIRE(res);
        const auto body = json::parse(res->body);
        CHECK(body.contains("campaign_digest"));
        for (const auto& q : body.at("queries")) {
            const auto r = client.Post("/api/labels", label_body(q.at("query_id"), truth(live, q), "ui").dump(), "application/json");
            CHECK(r->status == 201);
        }
        const auto adv = client.Post("/api/rounds/advance", "", "application/json");
        REQUIRE(adv->status == 200);
        if (json::parse(adv->body).at("complete") == true) break;
    }
    const auto metrics = json::parse(client.Get("/api/metrics")->body);
    CHECK(metrics.at("history").size() == 3);
    const auto final_view = json::parse(client.Get("/api/campaign")->body);
    server.stop();

    CHECK(live.state_digest() == batch.state_digest());
    CHECK(final_view.at("campaign_digest") == hex_digest(batch.state_digest()));
    CHECK(std::filesystem::exists(dir.path() / "state.json"));
    CHECK(std::filesystem::exists(dir.path() / "classifier.ckpt"));
}
