#include <logaction/evaluation.hpp>
#include <logaction/fixture.hpp>
#include <logaction/hashing.hpp>
#include <logaction/label_service.hpp>
#include <logaction/runtime.hpp>

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fcntl.h>
#include <fstream>
#include <sstream>
#include <sys/file.h>
#include <thread>
#include <unistd.h>

namespace logaction {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path run_root()
{
    if (const char* env = std::getenv("LOGACTION_RUN_DIR"); env && *env) return env;
    return "runs";
}

run_directory::run_directory(const experiment_config& cfg, const fs::path& root) : path_(root / cfg.experiment_id)
{
    fs::create_directories(path_);
    const auto lock = (path_ / ".lock").string();
    lock_fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT, 0644);
    if (lock_fd_ < 0) throw std::runtime_error("cannot open lock file " + lock);
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(lock_fd_);
        lock_fd_ = -1;
        throw run_locked("run directory " + path_.string() + " is in use by another process");
    }

    // the config copy pins the directory to one config digest
    const auto copy = path_ / "config.txt";
    if (fs::exists(copy)) {
        const auto existing = load_config(copy);
        if (existing.digest() != cfg.digest()) {
            throw config_error("experiment_id", "run directory " + path_.string() + " belongs to config " +
                                                    existing.digest_hex() + ", this config is " + cfg.digest_hex() +
                                                    "; choose a new experiment_id or remove the directory");
        }
    } else {
        save_config(copy, cfg);
    }
}

run_directory::~run_directory()
{
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
    }
}

void run_directory::require(const std::string& artifact, const std::string& upstream, const std::string& stage) const
{
    if (!fs::exists(path_ / artifact)) {
        throw stage_error(stage, "missing " + (path_ / artifact).string() + "; run stage " + upstream + " first");
    }
}

namespace {

std::atomic<bool> interrupted{false};

extern "C" void on_signal(int)
{
    interrupted = true;
}

// Artifacts each stage leaves behind, and the stage that writes them.
const char* const templates_artifact = "target.templates.json";
const char* const embeddings_artifact = "target.embeddings.tsv";
const char* const windows_artifact = "target.windows.tsv";
const char* const encoder_artifact = "campaign/encoder.ckpt";
const char* const classifier_artifact = "campaign/classifier.ckpt";

// Digest recorded in the first line ("... digest=<d>") or JSON "digest" field.
std::string recorded_digest(const fs::path& path)
{
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (!first.empty() && first.front() == '{') {
        in.seekg(0);
        try {
            const auto j = json::parse(in);
            return j.value("digest", j.value("config_digest", std::string{}));
        } catch (const json::exception&) {
            return {};
        }
    }
    const auto at = first.find("digest=");
    return at == std::string::npos ? std::string{} : first.substr(at + 7);
}

void check_lineage(const run_directory& rd, const std::string& artifact, const experiment_config& cfg,
                   const std::string& stage)
{
    const auto d = recorded_digest(rd.file(artifact));
    if (d != cfg.digest_hex()) {
        throw stage_error(stage, rd.file(artifact).string() + " was produced by config " + d + ", not " + cfg.digest_hex());
    }
}

std::vector<raw_log_record> records_of(const experiment_config& cfg, origin_type o)
{
    try {
        return load_system_records(cfg, o);
    } catch (const std::exception& e) {
        throw stage_error("parse", e.what());
    }
}

struct stage_context
{
    experiment_config cfg;
    std::unique_ptr<run_directory> rd;
};

// Rebuilds the prepared systems. Parsing, embedding, and windowing are pure
// functions of the config and inputs, so this reproduces the stage artifacts.
system_pair load_pair(const stage_context& ctx)
{
    const auto cache_path = ctx.rd->file("embeddings.cache");
    embedding_cache cache;
    if (fs::exists(cache_path)) cache = embedding_cache::load(cache_path);
    auto pair = prepare_pair(records_of(ctx.cfg, origin_type::source), records_of(ctx.cfg, origin_type::target), ctx.cfg,
                             ctx.cfg.embed_backend == "lm" ? &cache : nullptr);
    if (ctx.cfg.embed_backend == "lm") cache.save(cache_path);
    return pair;
}

void write_embeddings(const fs::path& path, const system_data& s, const std::string& digest)
{
    std::ostringstream out;
    out << "logaction-embeddings v1 digest=" << digest << '\n';
    const auto& e = *s.embeddings;
    char buf[32];
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
        out << i;
        for (Eigen::Index k = 0; k < e.cols(); ++k) {
            std::snprintf(buf, sizeof(buf), "\t%.17g", e(i, k));
            out << buf;
        }
        out << '\n';
    }
    write_text(path, out.str());
}

std::string scores_table(const std::vector<selection_score>& scores, const std::string& digest)
{
    std::ostringstream out;
    out << "# logaction-scores v1 digest=" << digest << '\n' << "window_index,e0,e1,free_energy,uncertainty,p0,p1\n";
    char buf[256];
    for (const auto& s : scores) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.window_index, s.e0, s.e1,
                      s.free_energy, s.uncertainty, s.p0, s.p1);
        out << buf;
    }
    return out.str();
}

json queries_json(const campaign& c)
{
    json out = {{"format", "logaction-queries"}, {"version", 1}, {"config_digest", c.config().digest_hex()},
                {"round", c.state().round + 1}, {"queries", json::array()}};
    for (const auto& q : c.state().queries) {
        out["queries"].push_back({{"query_id", q.query_id}, {"window_index", q.window_index},
                                  {"free_energy", q.score.free_energy}, {"uncertainty", q.score.uncertainty},
                                  {"p0", q.score.p0}, {"p1", q.score.p1}, {"raw_lines", q.raw_lines},
                                  {"template_lines", q.template_lines}, {"status", to_string(q.status)}});
    }
    return out;
}

void write_run_outputs(const run_directory& rd, const campaign& c)
{
    const auto digest = c.config().digest_hex();
    write_text(rd.file("metrics.csv"), metrics_table(c.metrics_by_round(), digest));
    write_text(rd.file("manifest.json"), manifest(c).dump(2) + "\n");
}

void write_round_outputs(const run_directory& rd, const campaign& c)
{
    const auto k = c.state().round;
    c.save(rd.file("rounds/round-" + std::to_string(k)));
    write_run_outputs(rd, c);
}

void print_metrics(std::ostream& out, const metrics_report& m)
{
    char buf[160];
    std::snprintf(buf, sizeof(buf), "round %zu budget %.4f  P %.4f  R %.4f  F1 %.4f  (tp %zu fp %zu tn %zu fn %zu)\n",
                  m.round, m.budget_fraction, m.precision, m.recall, m.f1, m.tp, m.fp, m.tn, m.fn);
    out << buf;
}

std::vector<std::uint64_t> seed_list(const experiment_config& cfg, std::size_t n)
{
    return default_seeds(cfg, n);
}

} // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"logaction: cross-system log anomaly detection with active domain adaptation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::string config_path;
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "Config file (key=value lines)");
        sub->add_option("-s,--set", overrides, "Override a config key: key=value (repeatable)");
    };

    std::string variant = "full";
    std::string oracle_name = "ground-truth";
    std::size_t seed_count = 5;
    std::vector<double> fractions;
    double step = 0.005;
    std::vector<std::string> variants{"full", "wa", "wu", "we", "wt"};
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string fixture_out = "fixture";
    std::size_t fixture_windows = 0;
    std::uint64_t fixture_seed = fixture_stream_seed;

    auto* parse = app.add_subcommand("parse", "Mine templates for the source and target logs");
    auto* embed = app.add_subcommand("embed", "Embed every template");
    auto* windows = app.add_subcommand("windows", "Split by time and cut count-based windows");
    auto* train_enc = app.add_subcommand("train-encoder", "Pretrain the sequence encoder on source windows");
    auto* train_src = app.add_subcommand("train-source", "Train the energy classifier on source log vectors");
    auto* select = app.add_subcommand("select", "Score the target pool and open the next round's queries");
    auto* round = app.add_subcommand("round", "Label the open round with an oracle, adapt, and evaluate");
    auto* camp = app.add_subcommand("campaign", "Run pretraining and every configured round");
    auto* sweep = app.add_subcommand("sweep", "F1 over labeling budgets, mean and stddev over seeds");
    auto* ablate = app.add_subcommand("ablate", "Compare selection variants over seeds");
    auto* eval = app.add_subcommand("eval", "Evaluate the current models on the target test windows");
    auto* exportv = app.add_subcommand("export-vectors", "Write target log vectors from the current encoder");
    auto* serve = app.add_subcommand("serve", "Serve the labeling API for a human-oracle campaign");
    auto* fixture = app.add_subcommand("fixture", "Write the synthetic two-system fixture and a config for it");

    for (auto* sub : {parse, embed, windows, train_enc, train_src, select, round, camp, sweep, ablate, eval, exportv, serve}) {
        add_common(sub);
    }
    for (auto* sub : {select, round, camp, eval, exportv, serve}) {
        sub->add_option("--variant", variant, "Selection variant: full, wa, wu, we, wt")->check(CLI::IsMember({"full", "wa", "wu", "we", "wt"}));
    }
    for (auto* sub : {round, camp}) {
        sub->add_option("--oracle", oracle_name, "Label source: ground-truth or human (human labels go through serve)")
            ->check(CLI::IsMember({"ground-truth", "human"}));
    }
    sweep->add_option("--seeds", seed_count, "Number of seeds, starting at the config seed")->check(CLI::PositiveNumber);
    sweep->add_option("--fractions", fractions, "Budgets to report (default 0, 0.005, ..., 0.05)");
    sweep->add_option("--step", step, "Per-round budget");
    ablate->add_option("--seeds", seed_count, "Number of seeds, starting at the config seed")->check(CLI::PositiveNumber);
    ablate->add_option("--variants", variants, "Variants to compare")->check(CLI::IsMember({"full", "wa", "wu", "we", "wt"}));
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)");
    fixture->add_option("-o,--out", fixture_out, "Output directory");
    fixture->add_option("--windows", fixture_windows, "Blocks per system (default 5000)");
    fixture->add_option("--seed", fixture_seed, "Stream seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (name == "fixture") {
            auto src = fixture_source();
            auto tgt = fixture_target();
            if (fixture_windows > 0) src.windows = tgt.windows = fixture_windows;
            fs::create_directories(fixture_out);
            const fs::path dir = fixture_out;
            write_alert_prefix(dir / "source.log", generate_fixture(src, fixture_seed));
            write_alert_prefix(dir / "target.log", generate_fixture(tgt, fixture_seed));
            auto cfg = fixture_config();
            cfg.source_path = fs::absolute(dir / "source.log").string();
            cfg.target_path = fs::absolute(dir / "target.log").string();
            save_config(dir / "fixture.conf", cfg);
            out << "wrote " << (dir / "source.log").string() << ", " << (dir / "target.log").string() << ", "
                << (dir / "fixture.conf").string() << '\n';
            return 0;
        }

        stage_context ctx;
        try {
            ctx.cfg = config_path.empty() ? experiment_config{} : load_config(config_path);
            for (const auto& kv : overrides) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw config_error("", "--set expects key=value, got '" + kv + "'");
                ctx.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
            }
            ctx.cfg.validate();
        } catch (const config_error& e) {
            throw stage_error("config", e.what());
        }
        ctx.rd = std::make_unique<run_directory>(ctx.cfg);
        const auto& cfg = ctx.cfg;
        const auto& rd = *ctx.rd;
        const auto digest = cfg.digest_hex();
        const auto opts = variant_options(variant);

        auto open_campaign = [&](const system_pair& data) {
            campaign c(data.source, data.target, cfg, opts);
            if (fs::exists(rd.file("campaign/state.json"))) {
                try {
                    c.restore(rd.file("campaign"));
                } catch (const load_error& e) {
                    throw stage_error(name, e.what());
                }
            }
            return c;
        };

        if (name == "parse") {
            const auto s = records_of(cfg, origin_type::source);
            const auto t = records_of(cfg, origin_type::target);
            for (const auto& [label, recs] : {std::pair{"source", &s}, std::pair{"target", &t}}) {
                template_miner miner(miner_settings(cfg));
                for (const auto& r : *recs) miner.parse_record(r.content);
                miner.snapshot(rd.file(std::string(label) + ".templates.json"), digest);
                out << label << ": " << recs->size() << " records, " << miner.templates().size() << " templates\n";
            }
        } else if (name == "embed") {
            rd.require(templates_artifact, "parse", name);
            check_lineage(rd, templates_artifact, cfg, name);
            const auto data = load_pair(ctx);
            write_embeddings(rd.file("source.embeddings.tsv"), data.source, digest);
            write_embeddings(rd.file("target.embeddings.tsv"), data.target, digest);
            out << "embedded " << data.source.embeddings->rows() << " + " << data.target.embeddings->rows()
                << " templates (d_w " << cfg.d_w << ", backend " << cfg.embed_backend << ")\n";
        } else if (name == "windows") {
            rd.require(embeddings_artifact, "embed", name);
            check_lineage(rd, embeddings_artifact, cfg, name);
            const auto data = load_pair(ctx);
            for (const auto& [label, s] : {std::pair{"source", &data.source}, std::pair{"target", &data.target}}) {
                std::vector<window_record> rows;
                for (const auto& w : s->train_windows) rows.push_back(to_record(w, "train"));
                for (const auto& w : s->test_windows) rows.push_back(to_record(w, "test"));
                write_windows(rd.file(std::string(label) + ".windows.tsv"), rows, digest);
                out << label << ": " << s->train_windows.size() << " train, " << s->test_windows.size() << " test windows\n";
            }
        } else if (name == "train-encoder") {
            rd.require(windows_artifact, "windows", name);
            check_lineage(rd, windows_artifact, cfg, name);
            const auto data = load_pair(ctx);
            auto c = open_campaign(data);
            c.pretrain_encoder();
            c.save(rd.file("campaign"));
            out << "encoder trained (" << c.encoder().parameters().size() << " parameters)\n";
        } else if (name == "train-source") {
            rd.require(encoder_artifact, "train-encoder", name);
            const auto data = load_pair(ctx);
            auto c = open_campaign(data);
            c.pretrain_classifier();
            c.save(rd.file("campaign"));
            write_round_outputs(rd, c);
            print_metrics(out, c.state().history.back().metrics);
        } else if (name == "select") {
            rd.require(classifier_artifact, "train-source", name);
            const auto data = load_pair(ctx);
            auto c = open_campaign(data);
            if (c.finished()) throw stage_error(name, "all configured rounds are complete");
            if (!c.state().round_open()) c.begin_round();
            c.save(rd.file("campaign"), false);
            const auto k = std::to_string(c.state().round + 1);
            write_text(rd.file("rounds/round-" + k + ".scores.csv"), scores_table(c.state().round_scores, digest));
            write_text(rd.file("rounds/round-" + k + ".queries.json"), queries_json(c).dump(2) + "\n");
            out << "round " << k << ": " << c.state().queries.size() << " queries, "
                << c.state().pending_queries().size() << " pending\n";
        } else if (name == "round") {
            rd.require(classifier_artifact, "train-source", name);
            if (oracle_name == "human") throw stage_error(name, "human labels are collected through `logaction serve`");
            const auto data = load_pair(ctx);
            auto c = open_campaign(data);
            if (c.finished()) throw stage_error(name, "all configured rounds are complete");
            ground_truth_oracle o(c.target());
            if (c.run_round(o) != campaign::round_status::completed) throw stage_error(name, "oracle left queries open");
            c.save(rd.file("campaign"));
            write_round_outputs(rd, c);
            print_metrics(out, c.state().history.back().metrics);
        } else if (name == "campaign") {
            if (oracle_name == "human") throw stage_error(name, "human labels are collected through `logaction serve`");
            const auto data = load_pair(ctx);
            auto c = open_campaign(data);
            ground_truth_oracle o(c.target());
            try {
                c.pretrain();
            } catch (const training_error& e) {
                throw stage_error("train", e.what());
            }
            c.save(rd.file("campaign"));
            if (c.state().round == 0) write_round_outputs(rd, c);
            while (!c.finished()) {
                if (c.run_round(o) != campaign::round_status::completed) throw stage_error("round", "oracle left queries open");
                c.save(rd.file("campaign"));
                write_round_outputs(rd, c);
            }
            write_run_outputs(rd, c);
            for (const auto& m : c.metrics_by_round()) print_metrics(out, m);
            out << "manifest " << rd.file("manifest.json").string() << '\n';
        } else if (name == "sweep") {
            const auto s = records_of(cfg, origin_type::source);
            const auto t = records_of(cfg, origin_type::target);
            if (fractions.empty()) fractions = default_sweep_fractions();
            const auto seeds = seed_list(cfg, seed_count);
            const auto points = budget_sweep(s, t, cfg, fractions, seeds, step);
            write_text(rd.file("sweep.csv"), sweep_table(points, digest));
            write_text(rd.file("sweep_runs.csv"), sweep_runs_table(points, seeds, digest));
            out << sweep_table(points, digest);
        } else if (name == "ablate") {
            const auto s = records_of(cfg, origin_type::source);
            const auto t = records_of(cfg, origin_type::target);
            std::vector<campaign_options> vs;
            for (const auto& v : variants) vs.push_back(variant_options(v));
            const auto seeds = seed_list(cfg, seed_count);
            const auto results = compare_variants(s, t, cfg, vs, seeds);
            std::ostringstream table;
            table << "# logaction-ablation v1 digest=" << digest << '\n' << "variant,seed,precision,recall,f1\n";
            char buf[160];
            for (std::size_t v = 0; v < vs.size(); ++v) {
                double sum = 0;
                for (const auto& r : results[v]) {
                    std::snprintf(buf, sizeof(buf), "%s,%llu,%.6f,%.6f,%.6f\n", r.variant.c_str(),
                                  static_cast<unsigned long long>(r.seed), r.final().precision, r.final().recall, r.final().f1);
                    table << buf;
                    sum += r.final().f1;
                }
                std::snprintf(buf, sizeof(buf), "%-5s mean F1 %.4f\n", variants[v].c_str(), sum / static_cast<double>(results[v].size()));
                out << buf;
            }
            write_text(rd.file("ablation.csv"), table.str());
        } else if (name == "eval") {
            rd.require(classifier_artifact, "train-source", name);
            const auto data = load_pair(ctx);
            const auto c = open_campaign(data);
            const auto m = c.evaluate();
            const json j = {{"format", "logaction-eval"}, {"version", 1}, {"config_digest", digest},
                            {"round", c.state().round}, {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn},
                            {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
            write_text(rd.file("eval.json"), j.dump(2) + "\n");
            print_metrics(out, m);
        } else if (name == "export-vectors") {
            rd.require(classifier_artifact, "train-source", name);
            const auto data = load_pair(ctx);
            const auto c = open_campaign(data);
            std::ostringstream table;
            table << "# logaction-vectors v1 digest=" << digest << '\n';
            char buf[32];
            auto emit = [&](const char* split, const matrix_type& v, const std::vector<log_sequence>& ws) {
                for (Eigen::Index i = 0; i < v.cols(); ++i) {
                    table << split << ',' << i << ',' << ws[static_cast<std::size_t>(i)].label;
                    for (Eigen::Index k = 0; k < v.rows(); ++k) {
                        std::snprintf(buf, sizeof(buf), ",%.9g", v(k, i));
                        table << buf;
                    }
                    table << '\n';
                }
            };
            emit("train", c.pool_vectors(), data.target.train_windows);
            emit("test", c.test_vectors(), data.target.test_windows);
            write_text(rd.file("vectors.csv"), table.str());
            out << "wrote " << rd.file("vectors.csv").string() << '\n';
        } else if (name == "serve") {
            const auto data = load_pair(ctx);
            auto c = open_campaign(data);
            label_service service(&c, rd.file("campaign"));
            label_server server(service);
            const int bound = server.start(host, port);
            out << "serving http://" << host << ':' << bound << "/api (Ctrl-C to stop)" << std::endl;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            while (!interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(200));
            server.stop();
            write_run_outputs(rd, c);
        }
        return 0;
    } catch (const stage_error& e) {
        err << "error: " << e.what() << '\n';
    } catch (const run_locked& e) {
        err << "error: " << name << ": " << e.what() << '\n';
    } catch (const config_error& e) {
        err << "error: config: " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << name << ": " << e.what() << '\n';
    }
    return 1;
}

} // namespace logaction
