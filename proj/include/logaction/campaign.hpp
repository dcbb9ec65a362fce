#pragma once
#include <logaction/config.hpp>
#include <logaction/encoder.hpp>
#include <logaction/energy.hpp>
#include <logaction/metrics.hpp>
#include <logaction/pipeline.hpp>
#include <logaction/selection.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace logaction {

enum class query_status
{
    pending,
    labeled,
    skipped
};

const char* to_string(query_status s);

struct query_item
{
    std::size_t query_id = 0;
    std::size_t window_index = 0;
    std::size_t round = 0; // the round this query belongs to (1-based)
    std::vector<std::string> raw_lines;
    std::vector<std::string> template_lines;
    selection_score score;
    query_status status = query_status::pending;
    std::optional<int> label;
    std::optional<std::string> labeler_id;
    std::string provenance; // "ground-truth", "human", ...
};

enum class submit_outcome
{
    accepted,
    duplicate,
    unknown_query
};

struct round_record
{
    std::size_t round = 0;
    std::vector<std::size_t> selected;
    std::vector<int> labels; // -1 for skipped
    std::vector<std::string> provenance;
    std::vector<std::string> labelers;
    metrics_report metrics;
};

struct campaign_state
{
    std::map<std::size_t, int> labeled_target; // window index -> label
    std::set<std::size_t> unlabeled_target;
    std::size_t original_pool_size = 0;
    std::size_t round = 0; // completed rounds
    double budget = 0;      // per-round fraction of the original pool
    double first_ratio = 0;
    std::vector<query_item> queries; // the open round's queries, empty between rounds
    std::vector<round_record> history; // round 0 is the pre-adaptation evaluation
    std::size_t next_query_id = 0;
    std::vector<selection_score> round_scores; // pool scores that drove the latest selection
    bool encoder_trained = false;
    bool pretrained = false; // encoder and Classifier(source) both trained

    std::size_t round_quota() const;
    bool round_open() const { return !queries.empty(); }
    std::vector<std::size_t> pending_queries() const;
};

/// Supplies labels for selected windows. answer() returns 0 or 1, -1 to skip,
/// or nullopt when no answer is available yet.
class oracle
{
public:
    virtual ~oracle() = default;
    virtual std::optional<int> answer(const query_item& q) = 0;
    virtual std::string provenance() const = 0;
    virtual std::string labeler_id() const { return provenance(); }
};

class ground_truth_oracle final : public oracle
{
public:
    explicit ground_truth_oracle(const system_data& target) : target_(&target) {}
    std::optional<int> answer(const query_item& q) override { return target_->train_windows.at(q.window_index).label; }
    std::string provenance() const override { return "ground-truth"; }

private:
    const system_data* target_;
};

// Never answers; models a human oracle that has not responded yet.
class deferred_oracle final : public oracle
{
public:
    std::optional<int> answer(const query_item&) override { return std::nullopt; }
    std::string provenance() const override { return "human"; }
};

struct campaign_options
{
    selection_variant variant = selection_variant::full;
    bool transfer = true; // false: no source pretraining, target labels only
};

std::string variant_name(const campaign_options& o);

/// One active adaptation campaign from a source system to a target system.
///
/// pretrain() trains the encoder and Classifier(source) on source windows.
/// Each round then scores the unlabeled target pool with the current
/// classifier, selects a quota of windows, collects labels, refreshes the
/// encoder on source plus labeled target windows, and fine-tunes the
/// classifier. Models and all random streams are derived from the config
/// seed, so a campaign is fully determined by its config, its inputs, and the
/// labels it receives.
///
/// Not internally synchronized: one writer at a time.
class campaign
{
public:
    campaign(const system_data& source, const system_data& target, experiment_config cfg, campaign_options opts = {});

    void pretrain(); // pretrain_encoder() then pretrain_classifier()
    void pretrain_encoder();
    void pretrain_classifier();

    /// Copy of a freshly pretrained campaign running a different selection
    /// operator, optionally under a new experiment id. Only valid before the
    /// first round.
    campaign fork(const campaign_options& opts, const std::string& experiment_id = {}) const;

    const campaign_state& state() const { return state_; }
    const experiment_config& config() const { return cfg_; }
    const campaign_options& options() const { return opts_; }
    const lstm_encoder<double>& encoder() const { return encoder_; }
    const discriminator<double>& disc() const { return disc_; }
    const energy_classifier<double>& classifier() const { return classifier_; }
    const system_data& target() const { return *target_; }
    const system_data& source() const { return *source_; }

    metrics_report evaluate() const;
    std::vector<selection_score> score_pool() const;

    const std::vector<query_item>& begin_round();
    submit_outcome submit(std::size_t query_id, int label_or_skip, const std::string& labeler_id,
                          const std::string& provenance);
    bool relabel(std::size_t query_id, int label);
    const round_record& complete_round();

    enum class round_status
    {
        completed,
        suspended
    };
    round_status run_round(oracle& o);

    /// Pretrains if needed and runs every configured round. Returns false if
    /// the oracle left a round unresolved (state stays resumable).
    bool run(oracle& o);

    bool finished() const { return state_.round >= static_cast<std::size_t>(cfg_.rounds); }
    std::vector<metrics_report> metrics_by_round() const;

    std::uint64_t state_digest() const;

    /// Writes state.json and, with with_models, the encoder and classifier
    /// checkpoints next to it.
    void save(const std::filesystem::path& dir, bool with_models = true) const;
    void restore(const std::filesystem::path& dir);

    const matrix_type& test_vectors() const { return test_vectors_; }
    const matrix_type& pool_vectors() const { return pool_vectors_; }

private:
    training_schedule schedule(int epochs, const std::string& stage) const;
    void refresh_vectors();
    matrix_type gather_pool(const std::vector<std::size_t>& windows) const;

    const system_data* source_;
    const system_data* target_;
    experiment_config cfg_;
    campaign_options opts_;
    campaign_state state_;
    lstm_encoder<double> encoder_;
    discriminator<double> disc_;
    energy_classifier<double> classifier_;
    matrix_type source_vectors_;
    matrix_type pool_vectors_; // every target train window, column = window index
    matrix_type test_vectors_;
};

class round_suspended : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// CSV with a leading "# logaction-metrics v1 digest=<d>" line.
std::string metrics_table(const std::vector<metrics_report>& rows, const std::string& digest);

} // namespace logaction
