#pragma once
#include <logaction/config.hpp>
#include <logaction/corpus.hpp>
#include <logaction/embedding.hpp>
#include <logaction/parsing.hpp>
#include <logaction/sequencing.hpp>

#include <memory>
#include <string>
#include <vector>

namespace logaction {

// One system after parsing, embedding, splitting, and windowing.
struct system_data
{
    origin_type origin = origin_type::source;
    std::vector<raw_log_record> train_records;
    std::vector<raw_log_record> test_records;
    std::vector<std::size_t> train_template_ids;
    std::vector<std::size_t> test_template_ids;
    template_miner miner;
    std::shared_ptr<const matrix_type> embeddings;
    std::vector<log_sequence> train_windows;
    std::vector<log_sequence> test_windows;

    std::vector<int> train_labels() const;
    std::vector<int> test_labels() const;
    std::vector<std::string> raw_lines(const log_sequence& w) const;       // train windows
    std::vector<std::string> template_lines(const log_sequence& w) const;
};

miner_config miner_settings(const experiment_config& cfg);

/// Parses every record with a fresh miner (one per system), embeds the
/// templates, splits by time, and cuts both sides into windows.
system_data prepare_system(const std::vector<raw_log_record>& records, const experiment_config& cfg,
                           origin_type origin, const embedding_backend& backend, embedding_cache* cache = nullptr);

std::vector<raw_log_record> load_system_records(const experiment_config& cfg, origin_type origin);

} // namespace logaction
