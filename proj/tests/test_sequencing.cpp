#include "support.hpp"

#include <logaction/sequencing.hpp>

#include <doctest.h>

using namespace logaction;

namespace {

struct stream
{
    std::vector<raw_log_record> records;
    std::vector<std::size_t> ids;
    std::shared_ptr<const matrix_type> table;
};

stream make_stream(std::size_t n)
{
    stream s;
    for (std::size_t i = 0; i < n; ++i) {
        raw_log_record r;
        r.line_no = i;
        r.timestamp = static_cast<std::int64_t>(i);
        r.content = "x";
        s.records.push_back(r);
        s.ids.push_back(i % 3);
    }
    s.table = std::make_shared<const matrix_type>(matrix_type::Random(3, 4));
    return s;
}

} // namespace

TEST_CASE("exact tiling and the short tail")
{
    auto s = make_stream(100);
    CHECK(build_windows(s.records, s.ids, s.table, 20, 20, origin_type::source).size() == 5);
    auto short_stream = make_stream(19);
    CHECK(build_windows(short_stream.records, short_stream.ids, short_stream.table, 20, 20, origin_type::source).empty());
    CHECK(build_windows(s.records, s.ids, s.table, 20, 10, origin_type::source).size() == 9);
}

TEST_CASE("a window is anomalous iff a member record is")
{
    auto s = make_stream(100);
    auto ws = build_windows(s.records, s.ids, s.table, 20, 20, origin_type::target);
    for (const auto& w : ws) CHECK(w.label == 0);
    s.records[37].is_anomalous = true;
    ws = build_windows(s.records, s.ids, s.table, 20, 20, origin_type::target);
    for (const auto& w : ws) CHECK(w.label == (w.window_index == 1 ? 1 : 0));
    CHECK(ws[1].first_record == 20);
    CHECK(ws[1].origin == origin_type::target);
    CHECK(ws[1].events.size() == 20);
    CHECK(ws[1].matrix().rows() == 20);
    CHECK(ws[1].matrix().row(3) == s.table->row(static_cast<Eigen::Index>(s.ids[23])));
}

TEST_CASE("pool statistics")
{
    auto s = make_stream(100);
    s.records[5].is_anomalous = true;
    const auto ws = build_windows(s.records, s.ids, s.table, 20, 20, origin_type::source);
    const auto st = pool_stats(ws);
    CHECK(st.at(origin_type::source) == pool_counts{4, 1});
    CHECK(pool_stats({}).empty());
}

TEST_CASE("window table round trip")
{
    test::temp_dir dir("windows");
    auto s = make_stream(60);
    s.records[12].is_anomalous = true;
    std::vector<window_record> rows;
    for (const auto& w : build_windows(s.records, s.ids, s.table, 10, 10, origin_type::target)) rows.push_back(to_record(w, "train"));
    write_windows(dir.path() / "w.tsv", rows, "00ff");
    CHECK(read_windows(dir.path() / "w.tsv") == rows);
}
