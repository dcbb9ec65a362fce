#include "support.hpp"

#include <doctest.h>

using namespace logaction;

namespace {

std::vector<raw_log_record> src()
{
    return generate_fixture(test::tiny_system(fixture_source()), 3);
}

std::vector<raw_log_record> tgt()
{
    return generate_fixture(test::tiny_system(fixture_target()), 3);
}

} // namespace

TEST_CASE("sweep fractions")
{
    const auto f = default_sweep_fractions();
    REQUIRE(f.size() == 11);
    CHECK(f.front() == 0.0);
    CHECK(f.back() == doctest::Approx(0.05));
    CHECK(f[1] == doctest::Approx(0.005));
}

TEST_CASE("a zero budget is the single no-adaptation point")
{
    auto cfg = test::tiny_config();
    const auto points = budget_sweep(src(), tgt(), cfg, {0.0}, {cfg.seed}, 0.02);
    REQUIRE(points.size() == 1);
    REQUIRE(points[0].f1.size() == 1);
    cfg.rounds = 0;
    const auto r = ccad_experiment(prepare_pair(src(), tgt(), cfg), cfg);
    CHECK(points[0].f1[0] == r.final().f1);
}

TEST_CASE("each sweep point holds one run per seed and prefixes match shorter campaigns")
{
    auto cfg = test::tiny_config();
    const std::vector<std::uint64_t> seeds{0, 1};
    const auto points = budget_sweep(src(), tgt(), cfg, {0.0, 0.02, 0.04}, seeds, 0.02);
    REQUIRE(points.size() == 3);
    for (const auto& p : points) CHECK(p.f1.size() == 2);

    // the 2% point equals a one-round campaign under the same seed
    auto one = cfg;
    one.seed = 1;
    one.experiment_id = cfg.experiment_id + "-sweep-s1";
    one.rounds = 1;
    const auto r = ccad_experiment(prepare_pair(src(), tgt(), one), one);
    CHECK(points[1].f1[1] == r.final().f1);

    const auto table = sweep_table(points, cfg.digest_hex());
    CHECK(table.rfind("# logaction-sweep v1 digest=" + cfg.digest_hex(), 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);
    CHECK_THROWS_AS(budget_sweep(src(), tgt(), cfg, {0.03}, seeds, 0.02), contract_error);
    CHECK_THROWS_AS(budget_sweep(src(), tgt(), cfg, {0.04, 0.02}, seeds, 0.02), contract_error);
}

TEST_CASE("ablation averages over seeds")
{
    const auto cfg = test::tiny_config();
    const auto a = ablation(src(), tgt(), cfg, "wa", {0, 1});
    REQUIRE(a.runs.size() == 2);
    CHECK(a.mean_f1 == doctest::Approx((a.runs[0].final().f1 + a.runs[1].final().f1) / 2));
    CHECK_THROWS_AS(variant_options("xx"), config_error);
}

TEST_CASE("variant comparison shares the pre-selection scores")
{
    const auto cfg = test::tiny_config();
    std::vector<campaign_options> vs;
    for (const auto* v : {"full", "wa", "wu", "we"}) vs.push_back(variant_options(v));
    const auto r = compare_variants(src(), tgt(), cfg, vs, {cfg.seed});
    for (std::size_t v = 1; v < vs.size(); ++v) CHECK(r[v][0].first_scores == r[0][0].first_scores);
    CHECK(r[0][0].rounds[0].tp == r[1][0].rounds[0].tp);
    CHECK(r[0][0].rounds[0].fp == r[1][0].rounds[0].fp);
}

TEST_CASE("manifest records lineage")
{
    const auto cfg = test::tiny_config();
    const auto data = prepare_pair(src(), tgt(), cfg);
    campaign c(data.source, data.target, cfg);
    ground_truth_oracle o(c.target());
    c.run(o);
    const auto m = manifest(c);
    CHECK(m.at("config_digest") == cfg.digest_hex());
    CHECK(m.at("rounds").size() == 3);
    CHECK(m.at("rounds")[1].at("provenance")[0] == "ground-truth");
    CHECK(m.at("uncertainty_order") == "least_margin");
}

TEST_CASE("stage errors name the stage")
{
    auto cfg = test::tiny_config();
    cfg.gap_seconds = 1e9;
    try {
        prepare_pair(src(), tgt(), cfg);
        FAIL("expected a stage error");
    } catch (const stage_error& e) {
        CHECK(e.stage() == "split");
    }
}
