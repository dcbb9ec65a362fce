#include <logaction/evaluation.hpp>
#include <logaction/hashing.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace logaction {

using nlohmann::json;

std::unique_ptr<embedding_backend> make_backend(const experiment_config& cfg)
{
    language_model_config lm;
    lm.model = cfg.lm_model;
    lm.endpoint = cfg.lm_endpoint;
    lm.dimension = cfg.d_w;
    lm.seed = derive_seed(cfg.seed, "embedding");
    return make_backend(cfg.embed_backend, cfg.d_w, derive_seed(cfg.seed, "embedding"), lm);
}

system_pair prepare_pair(const std::vector<raw_log_record>& source, const std::vector<raw_log_record>& target,
                         const experiment_config& cfg, embedding_cache* cache)
{
    const auto backend = make_backend(cfg);
    system_pair out;
    try {
        out.source = prepare_system(source, cfg, origin_type::source, *backend, cache);
        out.target = prepare_system(target, cfg, origin_type::target, *backend, cache);
    } catch (const embedding_error& e) {
        throw stage_error("embed", e.what());
    } catch (const split_error& e) {
        throw stage_error("split", e.what());
    }
    if (out.source.train_windows.empty()) throw stage_error("windows", "source system yields no training windows");
    if (out.target.train_windows.empty()) throw stage_error("windows", "target system yields no training windows");
    if (out.target.test_windows.empty()) throw stage_error("windows", "target system yields no test windows");
    return out;
}

run_result summarize(const campaign& c)
{
    run_result r;
    r.variant = variant_name(c.options());
    r.seed = c.config().seed;
    r.rounds = c.metrics_by_round();
    r.state_digest = c.state_digest();
    return r;
}

namespace {

experiment_config seeded(const experiment_config& cfg, std::uint64_t seed, const std::string& variant)
{
    auto c = cfg;
    c.seed = seed;
    c.experiment_id = cfg.experiment_id + "-" + variant + "-s" + std::to_string(seed);
    return c;
}

run_result finish(campaign& c)
{
    ground_truth_oracle oracle(c.target());
    std::vector<selection_score> first;
    c.pretrain();
    while (!c.finished()) {
        if (c.run_round(oracle) != campaign::round_status::completed) throw stage_error("round", "ground-truth oracle left queries open");
        if (first.empty() && c.state().round == 1) first = c.state().round_scores;
    }
    auto r = summarize(c);
    r.first_scores = std::move(first);
    return r;
}

} // namespace

run_result ccad_experiment(const system_pair& data, const experiment_config& cfg, campaign_options opts)
{
    campaign c(data.source, data.target, cfg, opts);
    try {
        return finish(c);
    } catch (const training_error& e) {
        throw stage_error("train", e.what());
    } catch (const contract_error& e) {
        throw stage_error("round", e.what());
    }
}

std::vector<std::vector<run_result>> compare_variants(const std::vector<raw_log_record>& source,
                                                      const std::vector<raw_log_record>& target,
                                                      const experiment_config& cfg,
                                                      const std::vector<campaign_options>& variants,
                                                      const std::vector<std::uint64_t>& seeds)
{
    std::vector<std::vector<run_result>> out(variants.size());
    for (auto seed : seeds) {
        // the experiment id does not feed any random stream, so one prepared pair serves all variants
        const auto base_cfg = seeded(cfg, seed, "base");
        const auto data = prepare_pair(source, target, base_cfg);
        std::optional<campaign> pretrained;
        for (std::size_t v = 0; v < variants.size(); ++v) {
            const auto name = variant_name(variants[v]);
            const auto vcfg = seeded(cfg, seed, name);
            if (!variants[v].transfer) {
                out[v].push_back(ccad_experiment(data, vcfg, variants[v]));
                continue;
            }
            if (!pretrained) {
                pretrained.emplace(data.source, data.target, base_cfg, campaign_options{});
                pretrained->pretrain();
            }
            campaign c = pretrained->fork(variants[v], vcfg.experiment_id);
            out[v].push_back(finish(c));
        }
    }
    return out;
}

std::vector<std::uint64_t> default_seeds(const experiment_config& cfg, std::size_t count)
{
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(cfg.seed + i);
    return out;
}

campaign_options variant_options(const std::string& name)
{
    if (name == "full") return {selection_variant::full, true};
    if (name == "wt") return {selection_variant::full, false};
    if (name == "wa") return {selection_variant::random_quota, true};
    if (name == "wu") return {selection_variant::random_second_stage, true};
    if (name == "we") return {selection_variant::uncertainty_only, true};
    throw config_error("variant", "unknown variant '" + name + "' (expected full, wt, wa, wu, or we)");
}

std::vector<double> default_sweep_fractions()
{
    std::vector<double> out;
    for (int i = 0; i <= 10; ++i) out.push_back(0.005 * i);
    return out;
}

std::vector<sweep_point> budget_sweep(const std::vector<raw_log_record>& source,
                                      const std::vector<raw_log_record>& target, const experiment_config& cfg,
                                      const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds,
                                      double step)
{
    if (fractions.empty()) throw contract_error("budget sweep needs at least one fraction");
    if (seeds.empty()) throw contract_error("budget sweep needs at least one seed");
    if (!(step > 0)) throw contract_error("budget step must be positive");
    std::vector<int> rounds;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (i > 0 && !(fractions[i] > fractions[i - 1])) throw contract_error("budget fractions must be strictly ascending");
        const double k = fractions[i] / step;
        if (fractions[i] < 0 || std::abs(k - std::round(k)) > 1e-6) {
            throw contract_error("budget fraction " + std::to_string(fractions[i]) + " is not a multiple of the round step");
        }
        rounds.push_back(static_cast<int>(std::lround(k)));
    }

    std::vector<sweep_point> points(fractions.size());
    for (std::size_t i = 0; i < fractions.size(); ++i) points[i].fraction = fractions[i];
    for (auto seed : seeds) {
        auto c = seeded(cfg, seed, "sweep");
        c.active_ratio = step;
        c.rounds = rounds.back();
        const auto data = prepare_pair(source, target, c);
        const auto r = ccad_experiment(data, c);
        for (std::size_t i = 0; i < points.size(); ++i) {
            points[i].f1.push_back(r.rounds.at(static_cast<std::size_t>(rounds[i])).f1);
        }
    }
    for (auto& p : points) {
        double sum = 0;
        for (double f : p.f1) sum += f;
        p.mean = sum / static_cast<double>(p.f1.size());
        double ss = 0;
        for (double f : p.f1) ss += (f - p.mean) * (f - p.mean);
        p.stddev = std::sqrt(ss / static_cast<double>(p.f1.size()));
    }
    return points;
}

ablation_result ablation(const std::vector<raw_log_record>& source, const std::vector<raw_log_record>& target,
                         const experiment_config& cfg, const std::string& variant,
                         const std::vector<std::uint64_t>& seeds)
{
    if (seeds.empty()) throw contract_error("ablation needs at least one seed");
    const auto opts = variant_options(variant);
    ablation_result out;
    out.variant = variant;
    out.runs = compare_variants(source, target, cfg, {opts}, seeds).front();
    for (const auto& r : out.runs) {
        out.mean_precision += r.final().precision;
        out.mean_recall += r.final().recall;
        out.mean_f1 += r.final().f1;
    }
    const auto n = static_cast<double>(out.runs.size());
    out.mean_precision /= n;
    out.mean_recall /= n;
    out.mean_f1 /= n;
    return out;
}

std::string sweep_table(const std::vector<sweep_point>& points, const std::string& digest)
{
    std::ostringstream out;
    out << "# logaction-sweep v1 digest=" << digest << '\n' << "fraction,mean_f1,stddev_f1\n";
    char buf[128];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%.4f,%.6f,%.6f\n", p.fraction, p.mean, p.stddev);
        out << buf;
    }
    return out.str();
}

std::string sweep_runs_table(const std::vector<sweep_point>& points, const std::vector<std::uint64_t>& seeds,
                             const std::string& digest)
{
    std::ostringstream out;
    out << "# logaction-sweep-runs v1 digest=" << digest << '\n' << "fraction,seed,f1\n";
    char buf[128];
    for (const auto& p : points) {
        for (std::size_t s = 0; s < p.f1.size(); ++s) {
            std::snprintf(buf, sizeof(buf), "%.4f,%llu,%.6f\n", p.fraction, static_cast<unsigned long long>(seeds.at(s)), p.f1[s]);
            out << buf;
        }
    }
    return out.str();
}

json manifest(const campaign& c)
{
    const auto& cfg = c.config();
    json j;
    j["format"] = "logaction-manifest";
    j["version"] = 1;
    j["config_digest"] = cfg.digest_hex();
    j["experiment_id"] = cfg.experiment_id;
    j["seed"] = cfg.seed;
    j["variant"] = variant_name(c.options());
    j["uncertainty_order"] = cfg.uncertainty_order;
    j["probability_rule"] = cfg.probability_rule;
    j["embed_backend"] = cfg.embed_backend;
    j["state_digest"] = hex_digest(c.state_digest());
    j["target_pool"] = c.state().original_pool_size;
    j["round_quota"] = c.state().round_quota();
    j["rounds"] = json::array();
    for (const auto& r : c.state().history) {
        json row = {{"round", r.round},
                    {"selected", r.selected},
                    {"labels", r.labels},
                    {"provenance", r.provenance},
                    {"labelers", r.labelers}};
        const auto& m = r.metrics;
        row["metrics"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}, {"precision", m.precision},
                          {"recall", m.recall}, {"f1", m.f1}, {"budget_fraction", m.budget_fraction}};
        j["rounds"].push_back(std::move(row));
    }
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

} // namespace logaction
