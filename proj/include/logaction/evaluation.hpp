#pragma once
#include <logaction/campaign.hpp>
#include <logaction/config.hpp>
#include <logaction/corpus.hpp>
#include <logaction/pipeline.hpp>

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

namespace logaction {

// Raised with the name of the pipeline stage that failed.
class stage_error : public std::runtime_error
{
public:
    stage_error(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

std::unique_ptr<embedding_backend> make_backend(const experiment_config& cfg);

struct system_pair
{
    system_data source;
    system_data target;
};

/// Parses, embeds, splits, and windows both systems. Each system gets its
/// own miner; nothing is shared between the two besides the backend.
system_pair prepare_pair(const std::vector<raw_log_record>& source, const std::vector<raw_log_record>& target,
                         const experiment_config& cfg, embedding_cache* cache = nullptr);

struct run_result
{
    std::string variant;
    std::uint64_t seed = 0;
    std::vector<metrics_report> rounds; // index 0 = before adaptation
    std::vector<selection_score> first_scores; // pool scores that drove round 1
    std::uint64_t state_digest = 0;

    const metrics_report& final() const { return rounds.back(); }
};

run_result summarize(const campaign& c);

/// Full pipeline on one source/target pair with a ground-truth oracle.
run_result ccad_experiment(const system_pair& data, const experiment_config& cfg, campaign_options opts = {});

/// Runs several selection variants per seed. Variants that keep source
/// pretraining share one pretrained campaign per seed and fork from it; wt
/// runs on its own. results[v][s] belongs to variants[v] and seeds[s].
std::vector<std::vector<run_result>> compare_variants(const std::vector<raw_log_record>& source,
                                                      const std::vector<raw_log_record>& target,
                                                      const experiment_config& cfg,
                                                      const std::vector<campaign_options>& variants,
                                                      const std::vector<std::uint64_t>& seeds);

std::vector<std::uint64_t> default_seeds(const experiment_config& cfg, std::size_t count = 5);

campaign_options variant_options(const std::string& name); // full, wt, wa, wu, we

struct sweep_point
{
    double fraction = 0;
    std::vector<double> f1; // one per seed
    double mean = 0;
    double stddev = 0; // population standard deviation over seeds
};

/// F1 over labeling budgets. Each budget f is reached in f / step rounds of
/// `step` each. Because every stage draws from seeds derived per round, the
/// first k rounds of a longer campaign are exactly the campaign run with k
/// rounds, so one campaign per seed yields every point.
std::vector<sweep_point> budget_sweep(const std::vector<raw_log_record>& source,
                                      const std::vector<raw_log_record>& target, const experiment_config& cfg,
                                      const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds,
                                      double step = 0.005);

std::vector<double> default_sweep_fractions(); // 0%, 0.5%, ..., 5%

struct ablation_result
{
    std::string variant;
    std::vector<run_result> runs;
    double mean_precision = 0;
    double mean_recall = 0;
    double mean_f1 = 0;
};

ablation_result ablation(const std::vector<raw_log_record>& source, const std::vector<raw_log_record>& target,
                         const experiment_config& cfg, const std::string& variant,
                         const std::vector<std::uint64_t>& seeds);

// fraction,mean_f1,stddev_f1 with a leading "# logaction-sweep v1 digest=" line.
std::string sweep_table(const std::vector<sweep_point>& points, const std::string& digest);
// fraction,seed,f1 for every run.
std::string sweep_runs_table(const std::vector<sweep_point>& points, const std::vector<std::uint64_t>& seeds,
                             const std::string& digest);

nlohmann::json manifest(const campaign& c);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace logaction
