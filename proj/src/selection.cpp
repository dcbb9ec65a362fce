#include <logaction/selection.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace logaction {

uncertainty_order uncertainty_order_from_string(const std::string& s)
{
    if (s == "least_margin") return uncertainty_order::least_margin;
    if (s == "literal_max_U") return uncertainty_order::literal_max_u;
    throw std::invalid_argument("unknown uncertainty order: " + s);
}

const char* to_string(uncertainty_order o)
{
    return o == uncertainty_order::least_margin ? "least_margin" : "literal_max_U";
}

std::vector<selection_score> score_vectors(const energy_classifier<double>& c, const matrix_type& vectors,
                                           std::span<const std::size_t> window_indices, probability_rule rule)
{
    if (static_cast<std::size_t>(vectors.cols()) != window_indices.size()) {
        throw shape_error("one window index per vector required");
    }
    std::vector<selection_score> out;
    if (window_indices.empty()) return out;
    const matrix_type e = c.forward(vectors);
    out.reserve(window_indices.size());
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
        const energy_pair<double> p{e(0, j), e(1, j)};
        selection_score s;
        s.window_index = window_indices[static_cast<std::size_t>(j)];
        s.e0 = p.e0;
        s.e1 = p.e1;
        s.free_energy = free_energy(p);
        std::tie(s.p0, s.p1) = class_probabilities(p, rule);
        s.uncertainty = std::abs(s.p0 - s.p1);
        out.push_back(s);
    }
    return out;
}

std::size_t first_stage_size(std::size_t pool_size, double first_ratio)
{
    // guard against ratio * n landing a hair above an integer
    const double exact = first_ratio * static_cast<double>(pool_size);
    auto n = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    return std::min(pool_size, std::max<std::size_t>(n, 1));
}

namespace {

std::vector<std::size_t> stage_one(std::span<const selection_score> pool, std::size_t keep)
{
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (pool[a].free_energy != pool[b].free_energy) return pool[a].free_energy > pool[b].free_energy;
                          return pool[a].window_index < pool[b].window_index;
                      });
    idx.resize(keep);
    return idx;
}

std::vector<std::size_t> stage_two(std::span<const selection_score> pool, std::vector<std::size_t> candidates,
                                   std::size_t quota, uncertainty_order order)
{
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(quota), candidates.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (pool[a].uncertainty != pool[b].uncertainty) {
                              return order == uncertainty_order::least_margin ? pool[a].uncertainty < pool[b].uncertainty
                                                                              : pool[a].uncertainty > pool[b].uncertainty;
                          }
                          return pool[a].window_index < pool[b].window_index;
                      });
    candidates.resize(quota);
    return candidates;
}

std::vector<std::size_t> to_windows(std::span<const selection_score> pool, const std::vector<std::size_t>& idx)
{
    std::vector<std::size_t> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(pool[i].window_index);
    return out;
}

std::vector<std::size_t> random_subset(std::vector<std::size_t> candidates, std::size_t quota, std::mt19937_64& rng)
{
    // partial Fisher-Yates
    for (std::size_t i = 0; i < quota; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
        std::swap(candidates[i], candidates[pick(rng)]);
    }
    candidates.resize(quota);
    return candidates;
}

void check_request(std::span<const selection_score> pool, double first_ratio, std::size_t quota)
{
    if (pool.empty()) throw contract_error("selection over an empty pool");
    if (!(first_ratio > 0 && first_ratio <= 1)) throw contract_error("first-stage ratio must lie in (0,1]");
    if (quota < 1) throw contract_error("selection quota must be at least 1");
    if (quota > first_stage_size(pool.size(), first_ratio)) {
        throw contract_error("quota " + std::to_string(quota) + " exceeds first-stage size " +
                             std::to_string(first_stage_size(pool.size(), first_ratio)));
    }
}

} // namespace

std::vector<std::size_t> sample_selection(std::span<const selection_score> pool, double first_ratio, std::size_t quota,
                                          uncertainty_order order)
{
    check_request(pool, first_ratio, quota);
    auto s1 = stage_one(pool, first_stage_size(pool.size(), first_ratio));
    return to_windows(pool, stage_two(pool, std::move(s1), quota, order));
}

std::vector<std::size_t> select_windows(std::span<const selection_score> pool, double first_ratio, std::size_t quota,
                                        uncertainty_order order, selection_variant variant, std::mt19937_64& rng)
{
    switch (variant) {
    case selection_variant::full:
        return sample_selection(pool, first_ratio, quota, order);
    case selection_variant::random_quota: {
        if (pool.empty()) throw contract_error("selection over an empty pool");
        if (quota < 1 || quota > pool.size()) throw contract_error("quota out of range for the pool");
        std::vector<std::size_t> all(pool.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return to_windows(pool, random_subset(std::move(all), quota, rng));
    }
    case selection_variant::random_second_stage: {
        check_request(pool, first_ratio, quota);
        auto s1 = stage_one(pool, first_stage_size(pool.size(), first_ratio));
        std::sort(s1.begin(), s1.end());
        return to_windows(pool, random_subset(std::move(s1), quota, rng));
    }
    case selection_variant::uncertainty_only:
        return sample_selection(pool, 1.0, quota, order);
    }
    throw std::logic_error("unhandled selection variant");
}

void write_scores(const std::filesystem::path& path, std::span<const selection_score> scores, const std::string& digest)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write score table: " + path.string());
    out << "logaction-scores v1 digest=" << digest << '\n' << std::setprecision(17);
    for (const auto& s : scores) {
        out << s.window_index << '\t' << s.e0 << '\t' << s.e1 << '\t' << s.free_energy << '\t' << s.uncertainty << '\t'
            << s.p0 << '\t' << s.p1 << '\n';
    }
}

std::vector<selection_score> read_scores(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw load_error("cannot read score table: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("logaction-scores v1", 0) != 0) {
        throw load_error("not a score table: " + path.string());
    }
    std::vector<selection_score> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        selection_score s;
        if (!(ss >> s.window_index >> s.e0 >> s.e1 >> s.free_energy >> s.uncertainty >> s.p0 >> s.p1)) {
            throw load_error("malformed score row: " + line);
        }
        out.push_back(s);
    }
    return out;
}

} // namespace logaction
