#include "support.hpp"

#include <logaction/parsing.hpp>

#include <doctest.h>

#include <fstream>

using namespace logaction;

TEST_CASE("lines differing in one parameter share a template")
{
    template_miner m(miner_config{4, 0.5, 100});
    const auto a = m.parse_record("Failed to open file /var/a");
    const auto b = m.parse_record("Failed to open file /etc/b");
    CHECK(a == b);
    REQUIRE(m.templates().size() == 1);
    CHECK(m.at(a).text() == "Failed to open file <*>");
    CHECK(m.at(a).tokens[4] == "<*>");
}

TEST_CASE("repeated lines and dissimilar lines")
{
    template_miner m(miner_config{4, 0.5, 100});
    CHECK(m.templates().empty());
    const auto a = m.parse_record("service started");
    CHECK(m.parse_record("service started") == a);
    CHECK(m.parse_record("service started") == a);
    CHECK(m.at(a).match_count == 3);

    template_miner n(miner_config{4, 0.5, 100});
    CHECK(n.parse_record("alpha beta") != n.parse_record("gamma delta"));
}

TEST_CASE("match counts total the parse calls")
{
    template_miner m;
    const auto recs = generate_fixture(test::tiny_system(fixture_source(), 40), 2);
    for (const auto& r : recs) m.parse_record(r.content);
    std::size_t total = 0;
    for (std::size_t i = 0; i < m.templates().size(); ++i) {
        CHECK(m.templates()[i].template_id == i);
        total += m.templates()[i].match_count;
    }
    CHECK(total == recs.size());
    CHECK(m.parse_count() == recs.size());
}

TEST_CASE("numeric-first lines parse")
{
    template_miner m;
    const auto a = m.parse_record("42 blocks written");
    const auto b = m.parse_record("77 blocks written");
    CHECK(a == b);
}

TEST_CASE("snapshot round trip keeps future assignments")
{
    test::temp_dir dir("parsing");
    const auto recs = generate_fixture(test::tiny_system(fixture_source(), 60), 4);
    const std::size_t half = recs.size() / 2;

    template_miner empty;
    empty.snapshot(dir.path() / "empty.json");
    CHECK(template_miner::restore(dir.path() / "empty.json").templates().empty());

    template_miner m;
    for (std::size_t i = 0; i < half; ++i) m.parse_record(recs[i].content);
    m.snapshot(dir.path() / "m.json", "abc");
    auto r = template_miner::restore(dir.path() / "m.json");
    CHECK(r.templates() == m.templates());
    for (std::size_t i = half; i < recs.size(); ++i) CHECK(r.parse_record(recs[i].content) == m.parse_record(recs[i].content));
    CHECK(r.templates() == m.templates());
}

TEST_CASE("corrupted snapshot is a load error")
{
    test::temp_dir dir("parsing-bad");
    template_miner m;
    m.parse_record("disk full on /dev/sda1");
    m.snapshot(dir.path() / "m.json");
    std::string text;
    {
        std::ifstream in(dir.path() / "m.json");
        text.assign(std::istreambuf_iterator<char>(in), {});
    }
    std::ofstream(dir.path() / "cut.json") << text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(template_miner::restore(dir.path() / "cut.json"), load_error);
    std::ofstream(dir.path() / "garbage.json") << "not a snapshot";
    CHECK_THROWS_AS(template_miner::restore(dir.path() / "garbage.json"), load_error);
}
