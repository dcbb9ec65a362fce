#pragma once
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace logaction {

class config_error : public std::invalid_argument
{
public:
    config_error(std::string key, const std::string& what)
        : std::invalid_argument(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct experiment_config
{
    // training
    int epochs = 60;
    int batch_size = 512;
    double learning_rate = 1e-3;
    double clip_norm = 5.0;
    int refresh_epochs = 10;  // encoder refresh per active round
    int finetune_epochs = 10; // classifier fine-tuning per active round

    // encoder
    int encoder_layers = 2;
    int encoder_hidden = 512;

    // anomaly classifier
    int classifier_input = 512;
    int classifier_hidden = 64;
    int classifier_layer = 64;

    // active domain adaptation
    double energy_align_weight = 0.01;
    double first_sample_ratio = 0.1;
    double active_ratio = 0.01;
    int rounds = 2;
    std::string uncertainty_order = "least_margin";
    std::string probability_rule = "energy_ratio";

    // data
    int window_size = 20;
    int stride = 20;
    std::string embed_backend = "hashed";
    int d_w = 512;
    double split_ratio = 0.7;
    double gap_seconds = 60;
    int miner_depth = 4;
    double miner_similarity = 0.4;
    int miner_max_children = 100;

    std::uint64_t seed = 0;
    std::string experiment_id = "default";

    std::string source_path, source_format = "alert-prefix", source_labels;
    std::string target_path, target_format = "alert-prefix", target_labels;
    std::string lm_model, lm_endpoint;

    /// Canonical key=value text, one key per line in registry order.
    std::string to_text() const;
    std::uint64_t digest() const;
    std::string digest_hex() const;
    void validate() const;

    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& keys();

    bool operator==(const experiment_config&) const = default;
};

/// key=value lines, '#' comments. Absent keys keep their defaults; unknown
/// keys and out-of-range values raise config_error naming the key.
experiment_config load_config(const std::filesystem::path& path);
experiment_config parse_config(const std::string& text);
void save_config(const std::filesystem::path& path, const experiment_config& cfg);

} // namespace logaction
