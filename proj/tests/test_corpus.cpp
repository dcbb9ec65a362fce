#include "support.hpp"

#include <logaction/corpus.hpp>

#include <doctest.h>

#include <fstream>

using namespace logaction;

namespace {

std::vector<raw_log_record> uniform(std::size_t n)
{
    std::vector<raw_log_record> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].line_no = i;
        out[i].timestamp = static_cast<std::int64_t>(i);
        out[i].content = "event " + std::to_string(i);
    }
    return out;
}

std::vector<std::int64_t> stamps(const std::vector<raw_log_record>& rs)
{
    std::vector<std::int64_t> out;
    for (const auto& r : rs) out.push_back(r.timestamp);
    return out;
}

} // namespace

TEST_CASE("alert-prefix lines follow the leading dash convention")
{
    test::temp_dir dir("corpus");
    const auto path = dir.path() / "bgl.log";
    std::ofstream(path) << "- 1117838570 2005.06.03 R02-M1-N0-C:J12-U11 RAS KERNEL INFO instruction cache parity error corrected\n"
                        << "\n"
                        << "APPREAD 1117869872 2005.06.04 R04-M1-N4-I:J18-U11 RAS APP FATAL ciod: failed to read message prefix\n";
    const auto recs = load_labeled_log(path, corpus_format::alert_prefix);
    REQUIRE(recs.size() == 2);
    CHECK_FALSE(recs[0].is_anomalous);
    CHECK(recs[0].timestamp == 1117838570);
    CHECK(recs[1].is_anomalous);
    CHECK(recs[1].alert_tag == "APPREAD");
    CHECK(recs[1].line_no == 2);
    CHECK(recs[1].content.find("ciod: failed to read message prefix") != std::string::npos);
}

TEST_CASE("empty and unreadable files")
{
    test::temp_dir dir("corpus-empty");
    std::ofstream(dir.path() / "empty.log");
    CHECK(load_labeled_log(dir.path() / "empty.log", corpus_format::alert_prefix).empty());
    CHECK_THROWS_AS(load_labeled_log(dir.path() / "missing.log", corpus_format::alert_prefix), ingestion_error);
}

TEST_CASE("sidecar labels must cover every line")
{
    test::temp_dir dir("corpus-sidecar");
    std::ofstream(dir.path() / "zk.log") << "100 session established\n101 session expired ERROR\n102 leader elected\n";
    std::ofstream(dir.path() / "zk.labels") << "0 0\n1 1\n2 0\n";
    const auto recs = load_labeled_log(dir.path() / "zk.log", corpus_format::sidecar_labels, dir.path() / "zk.labels");
    REQUIRE(recs.size() == 3);
    CHECK(recs[1].is_anomalous);
    CHECK_FALSE(recs[2].is_anomalous);

    std::ofstream(dir.path() / "short.labels") << "0 0\n2 0\n";
    try {
        load_labeled_log(dir.path() / "zk.log", corpus_format::sidecar_labels, dir.path() / "short.labels");
        FAIL("expected a labeling error");
    } catch (const labeling_error& e) {
        CHECK(e.line_no() == 1);
    }
}

TEST_CASE("severity-derived sidecar")
{
    test::temp_dir dir("corpus-severity");
    std::ofstream(dir.path() / "a.log") << "1 INFO ok\n2 ERROR disk\n3 WARN slow\n4 FATAL oops\n";
    const auto labels = derive_severity_labels(dir.path() / "a.log");
    const std::vector<std::pair<std::size_t, int>> expected{{0, 0}, {1, 1}, {2, 0}, {3, 1}};
    CHECK(labels == expected);
}

TEST_CASE("temporal split without gap is an exact 7:3 cut")
{
    const auto s = temporal_split(uniform(10), 0.7, 0);
    CHECK(stamps(s.train) == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5, 6});
    CHECK(stamps(s.test) == std::vector<std::int64_t>{7, 8, 9});
    CHECK(s.dropped.empty());
}

TEST_CASE("records inside the gap are dropped")
{
    // t < 6 + 1.5 is excluded from test, so t7 falls in the gap
    const auto s = temporal_split(uniform(10), 0.7, 1.5);
    CHECK(stamps(s.train) == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5, 6});
    CHECK(stamps(s.test) == std::vector<std::int64_t>{8, 9});
    CHECK(stamps(s.dropped) == std::vector<std::int64_t>{7});
}

TEST_CASE("minimal split and a gap that swallows the test side")
{
    const auto s = temporal_split(uniform(2), 0.5, 0);
    CHECK(stamps(s.train) == std::vector<std::int64_t>{0});
    CHECK(stamps(s.test) == std::vector<std::int64_t>{1});
    CHECK_THROWS_AS(temporal_split(uniform(10), 0.7, 100), split_error);
}

TEST_CASE("split partitions the input")
{
    for (double gap : {0.0, 0.5, 2.0, 3.0}) {
        const auto in = uniform(50);
        const auto s = temporal_split(in, 0.6, gap);
        CHECK(s.train.size() + s.test.size() + s.dropped.size() == in.size());
        std::vector<raw_log_record> all = s.train;
        all.insert(all.end(), s.dropped.begin(), s.dropped.end());
        all.insert(all.end(), s.test.begin(), s.test.end());
        CHECK(all == in);
    }
}

TEST_CASE("reloading a file is deterministic")
{
    test::temp_dir dir("corpus-reload");
    const auto recs = generate_fixture(test::tiny_system(fixture_target(), 50), 1);
    write_alert_prefix(dir.path() / "t.log", recs);
    const auto a = load_labeled_log(dir.path() / "t.log", corpus_format::alert_prefix);
    const auto b = load_labeled_log(dir.path() / "t.log", corpus_format::alert_prefix);
    CHECK(a == b);
    REQUIRE(a.size() == recs.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].content == recs[i].content);
        CHECK(a[i].is_anomalous == recs[i].is_anomalous);
    }
}
