#pragma once
#include <logaction/corpus.hpp>
#include <logaction/types.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace logaction {

// A window of t consecutive events. The embedding matrix is materialized on
// demand from the shared per-system table: row i is the embedding of events[i].
struct log_sequence
{
    std::vector<std::size_t> events;
    std::shared_ptr<const matrix_type> embeddings;
    int label = 0; // 1 iff any member record is anomalous
    origin_type origin = origin_type::source;
    std::size_t window_index = 0;
    std::int64_t first_timestamp = 0;
    std::int64_t last_timestamp = 0;
    std::size_t first_record = 0; // offset of events[0] in the input record list

    std::size_t length() const { return events.size(); }
    matrix_type matrix() const;
    auto row(std::size_t i) const { return embeddings->row(static_cast<Eigen::Index>(events[i])); }
};

/// Window k covers records [k*stride, k*stride + window_size); a trailing
/// partial window is dropped.
std::vector<log_sequence> build_windows(const std::vector<raw_log_record>& records,
                                        const std::vector<std::size_t>& template_ids,
                                        std::shared_ptr<const matrix_type> embeddings,
                                        std::size_t window_size,
                                        std::size_t stride,
                                        origin_type origin);

struct pool_counts
{
    std::size_t normal = 0;
    std::size_t anomalous = 0;
    bool operator==(const pool_counts&) const = default;
};

std::map<origin_type, pool_counts> pool_stats(const std::vector<log_sequence>& windows);

// Line-oriented window interchange:
//   logaction-windows v1 digest=<config digest>
//   <window_index>\t<origin>\t<split>\t<label>\t<id id ...>
struct window_record
{
    std::size_t window_index = 0;
    origin_type origin = origin_type::source;
    std::string split;
    int label = 0;
    std::vector<std::size_t> events;
    bool operator==(const window_record&) const = default;
};

window_record to_record(const log_sequence& w, const std::string& split);

void write_windows(const std::filesystem::path& path, const std::vector<window_record>& rows, const std::string& digest);
std::vector<window_record> read_windows(const std::filesystem::path& path);

} // namespace logaction
