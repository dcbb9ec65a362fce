#pragma once
#include <logaction/energy.hpp>

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace logaction {

struct selection_score
{
    std::size_t window_index = 0;
    double e0 = 0;
    double e1 = 0;
    double free_energy = 0;
    double uncertainty = 0; // |p0 - p1|
    double p0 = 0;
    double p1 = 0;
    bool operator==(const selection_score&) const = default;
};

// least_margin picks the smallest |p0 - p1| (least confident); literal_max_u
// picks the largest.
enum class uncertainty_order
{
    least_margin,
    literal_max_u
};

uncertainty_order uncertainty_order_from_string(const std::string& s);
const char* to_string(uncertainty_order o);

// Which selection operator a run uses. full is the two-stage energy then
// uncertainty selection; the others each replace one part of it.
enum class selection_variant
{
    full,
    random_quota,        // uniform random quota from the pool
    random_second_stage, // stage 2 random within stage 1
    uncertainty_only     // stage 1 is the whole pool
};

/// Scores each column of vectors; window_indices labels the columns.
std::vector<selection_score> score_vectors(const energy_classifier<double>& c, const matrix_type& vectors,
                                           std::span<const std::size_t> window_indices,
                                           probability_rule rule = probability_rule::energy_ratio);

std::size_t first_stage_size(std::size_t pool_size, double first_ratio);

/// Two-stage selection. Stage 1 keeps the ceil(first_ratio * |pool|) members
/// with the largest free energy; stage 2 keeps `quota` of those ordered by
/// uncertainty. Ties break by ascending window index. Returns window indices
/// in selection order.
std::vector<std::size_t> sample_selection(std::span<const selection_score> pool, double first_ratio, std::size_t quota,
                                          uncertainty_order order = uncertainty_order::least_margin);

std::vector<std::size_t> select_windows(std::span<const selection_score> pool, double first_ratio, std::size_t quota,
                                        uncertainty_order order, selection_variant variant, std::mt19937_64& rng);

// logaction-scores v1 digest=<d>
// window_index e0 e1 F U p0 p1  (tab separated)
void write_scores(const std::filesystem::path& path, std::span<const selection_score> scores, const std::string& digest);
std::vector<selection_score> read_scores(const std::filesystem::path& path);

} // namespace logaction
