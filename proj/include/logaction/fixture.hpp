#pragma once
#include <logaction/config.hpp>
#include <logaction/corpus.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace logaction {

// Synthetic log system for desk-scale experiments. Two systems built with
// different `vocabulary` seeds share no private tokens. Normal messages mix
// private words with a common everyday vocabulary, and anomalies of the same
// kind share a small set of keywords ("error", "timeout", ...) across systems.
struct fixture_system
{
    std::string name;
    std::uint64_t vocabulary = 0;  // seeds the system's private word list
    std::size_t windows = 5000;    // blocks of `block` consecutive lines
    std::size_t block = 10;
    double anomaly_rate = 0.05;    // share of blocks holding an anomaly
    std::vector<int> anomaly_kinds; // indices into fixture_anomaly_keywords()
    std::size_t normal_templates = 150;
    std::size_t anomaly_variants = 1;   // templates per anomaly kind
    std::size_t anomaly_lines = 3;      // at most this many anomalous lines per anomalous block
    std::size_t normal_common_words = 3;  // per normal template
    std::size_t normal_private_words = 1;
    std::size_t workflows = 40;      // fixed template chains normal traffic is drawn from
    std::size_t decoy_templates = 0; // normal templates carrying anomaly keywords
    std::int64_t start_time = 1600000000;
};

const std::vector<std::vector<std::string>>& fixture_anomaly_keywords();
// Everyday words both systems use in normal messages.
const std::vector<std::string>& fixture_common_words();

// The source and target systems used by the acceptance suite.
fixture_system fixture_source();
fixture_system fixture_target();

// Desk-scale hyperparameters for the fixture: narrower layers, fewer epochs,
// and windows of one block. Everything else keeps its default.
experiment_config fixture_config();

// Stream seed of the fixture the acceptance suite runs on.
inline constexpr std::uint64_t fixture_stream_seed = 7;

std::vector<raw_log_record> generate_fixture(const fixture_system& sys, std::uint64_t seed);

// "<tag> <epoch> <content>" lines, tag "-" for normal lines.
void write_alert_prefix(const std::filesystem::path& path, const std::vector<raw_log_record>& records);
// "<epoch> <content>" lines plus a "<line_no> <0|1>" sidecar.
void write_sidecar_log(const std::filesystem::path& log_path, const std::filesystem::path& label_path,
                       const std::vector<raw_log_record>& records);

} // namespace logaction
