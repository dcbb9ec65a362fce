#include "support.hpp"

#include <logaction/runtime.hpp>

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace logaction;

namespace {

struct cli_result
{
    int status;
    std::string out;
    std::string err;
};

cli_result run(std::vector<std::string> args)
{
    args.insert(args.begin(), "logaction");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {status, out.str(), err.str()};
}

std::string read(const std::filesystem::path& p)
{
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Writes a tiny fixture and a config for it; runs land in dir/runs.
std::string prepare(const test::temp_dir& dir)
{
    setenv("LOGACTION_RUN_DIR", (dir.path() / "runs").c_str(), 1);
    write_alert_prefix(dir.path() / "s.log", generate_fixture(test::tiny_system(fixture_source()), 3));
    write_alert_prefix(dir.path() / "t.log", generate_fixture(test::tiny_system(fixture_target()), 3));
    auto cfg = test::tiny_config();
    cfg.source_path = (dir.path() / "s.log").string();
    cfg.target_path = (dir.path() / "t.log").string();
    const auto path = dir.path() / "c.conf";
    save_config(path, cfg);
    return path.string();
}

} // namespace

TEST_CASE("help lists every subcommand")
{
    const auto r = run({"--help"});
    CHECK(r.status == 0);
    for (const auto* s : {"parse", "embed", "windows", "train-encoder", "train-source", "select", "round", "campaign", "sweep",
                          "ablate", "eval", "export-vectors", "serve"}) {
        CHECK_MESSAGE(r.out.find(std::string("  ") + s + " ") != std::string::npos, s);
    }
}

TEST_CASE("stages refuse to run before their inputs exist")
{
    test::temp_dir dir("cli-stages");
    const auto cfg = prepare(dir);
    auto r = run({"select", "-c", cfg});
    CHECK(r.status != 0);
    CHECK(r.err.find("select") != std::string::npos);
    CHECK(r.err.find("run stage train-source first") != std::string::npos);
    r = run({"embed", "-c", cfg});
    CHECK(r.err.find("run stage parse first") != std::string::npos);

    for (const auto* s : {"parse", "embed", "windows", "train-encoder", "train-source", "select", "round", "eval", "export-vectors"}) {
        const auto step = run({s, "-c", cfg});
        CHECK_MESSAGE(step.status == 0, s, ": ", step.err);
    }
    const auto rd = dir.path() / "runs" / "tiny";
    const auto digest = load_config(cfg).digest_hex();
    CHECK(read(rd / "target.windows.tsv").find("digest=" + digest) != std::string::npos);
    CHECK(read(rd / "rounds" / "round-1.scores.csv").find("digest=" + digest) != std::string::npos);
    CHECK(read(rd / "vectors.csv").find("digest=" + digest) != std::string::npos);
    CHECK(std::filesystem::exists(rd / "rounds" / "round-1" / "classifier.ckpt"));
}

TEST_CASE("campaign writes a manifest and reproducible metrics")
{
    test::temp_dir dir("cli-campaign");
    const auto cfg = prepare(dir);
    const auto a = run({"campaign", "-c", cfg, "--oracle", "ground-truth"});
    CHECK_MESSAGE(a.status == 0, a.err);
    const auto rd = dir.path() / "runs" / "tiny";
    CHECK(std::filesystem::exists(rd / "manifest.json"));
    const auto first = read(rd / "metrics.csv");
    CHECK(first.rfind("# logaction-metrics v1 digest=" + load_config(cfg).digest_hex(), 0) == 0);

    const auto b = run({"campaign", "-c", cfg, "-s", "experiment_id=again"});
    CHECK(b.status == 0);
    auto second = read(dir.path() / "runs" / "again" / "metrics.csv");
    // identical apart from the digest line and the experiment id column
    auto strip = [](std::string s, const std::string& id) {
        s = s.substr(s.find('\n') + 1);
        for (auto at = s.find(id + ","); at != std::string::npos; at = s.find(id + ",")) s.replace(at, id.size(), "ID");
        return s;
    };
    CHECK(strip(first, "tiny") == strip(second, "again"));
}

TEST_CASE("config and lock errors")
{
    test::temp_dir dir("cli-errors");
    const auto cfg = prepare(dir);
    const auto bad = run({"parse", "-c", cfg, "-s", "learning_rate=-1"});
    CHECK(bad.status != 0);
    CHECK(bad.err.find("learning_rate") != std::string::npos);

    run_directory held(load_config(cfg), dir.path() / "runs");
    const auto locked = run({"parse", "-c", cfg});
    CHECK(locked.status != 0);
    CHECK(locked.err.find("in use") != std::string::npos);
}

TEST_CASE("a run directory belongs to one config")
{
    test::temp_dir dir("cli-digest");
    const auto cfg = prepare(dir);
    CHECK(run({"parse", "-c", cfg}).status == 0);
    const auto other = run({"parse", "-c", cfg, "-s", "seed=5"});
    CHECK(other.status != 0);
    CHECK(other.err.find("belongs to config") != std::string::npos);
}
