#include <logaction/selection.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace logaction;

namespace {

// Two independent full sorts, written without the library's helpers.
std::vector<std::size_t> brute_force(std::vector<selection_score> pool, double ratio, std::size_t quota, bool least_margin)
{
    std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
        return a.free_energy != b.free_energy ? a.free_energy > b.free_energy : a.window_index < b.window_index;
    });
    const auto keep = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(pool.size()) - 1e-9));
    pool.resize(std::max<std::size_t>(1, keep));
    std::sort(pool.begin(), pool.end(), [&](const auto& a, const auto& b) {
        if (a.uncertainty != b.uncertainty) return least_margin ? a.uncertainty < b.uncertainty : a.uncertainty > b.uncertainty;
        return a.window_index < b.window_index;
    });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < quota; ++i) out.push_back(pool[i].window_index);
    return out;
}

std::vector<selection_score> random_pool(std::mt19937_64& rng, std::size_t n)
{
    // coarse values force plenty of ties
    std::uniform_int_distribution<int> f(0, 40), u(0, 20);
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i * 3 + 1;
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<selection_score> pool(n);
    for (std::size_t i = 0; i < n; ++i) {
        pool[i].window_index = ids[i];
        pool[i].free_energy = f(rng) * 0.25;
        pool[i].uncertainty = u(rng) * 0.05;
    }
    return pool;
}

} // namespace

TEST_CASE("ten-vector example")
{
    std::vector<selection_score> pool(10);
    for (std::size_t i = 0; i < 10; ++i) {
        pool[i].window_index = i;
        pool[i].free_energy = 10.0 - static_cast<double>(i);
        pool[i].uncertainty = 0.1 * static_cast<double>(i);
    }
    CHECK(first_stage_size(10, 0.5) == 5);
    CHECK(sample_selection(pool, 0.5, 2) == std::vector<std::size_t>{0, 1});
    CHECK(sample_selection(pool, 0.5, 2, uncertainty_order::literal_max_u) == std::vector<std::size_t>{4, 3});
    auto all = sample_selection(pool, 1.0, 10);
    std::sort(all.begin(), all.end());
    CHECK(all.size() == 10);
    CHECK(all.front() == 0);
    CHECK(all.back() == 9);
}

TEST_CASE("ties go to the smaller window index")
{
    std::vector<selection_score> pool(2);
    pool[0].window_index = 9;
    pool[1].window_index = 4;
    for (auto& s : pool) {
        s.free_energy = 1;
        s.uncertainty = 0.3;
    }
    CHECK(sample_selection(pool, 1.0, 1) == std::vector<std::size_t>{4});
}

TEST_CASE("contract violations")
{
    std::vector<selection_score> pool(4);
    for (std::size_t i = 0; i < 4; ++i) pool[i].window_index = i;
    CHECK_THROWS_AS(sample_selection({}, 0.5, 1), contract_error);
    CHECK_THROWS_AS(sample_selection(pool, 0.5, 3), contract_error);
    CHECK_THROWS_AS(sample_selection(pool, 0.0, 1), contract_error);
    CHECK_THROWS_AS(sample_selection(pool, 1.5, 1), contract_error);
}

TEST_CASE("matches the brute-force oracle")
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = static_cast<std::size_t>(1 + rng() % 300);
        const auto pool = random_pool(rng, n);
        const double ratio = 0.05 + 0.95 * static_cast<double>(rng() % 1000) / 1000.0;
        const auto stage1 = first_stage_size(n, ratio);
        const auto quota = static_cast<std::size_t>(1 + rng() % stage1);
        CHECK(sample_selection(pool, ratio, quota) == brute_force(pool, ratio, quota, true));
        CHECK(sample_selection(pool, ratio, quota, uncertainty_order::literal_max_u) == brute_force(pool, ratio, quota, false));
    }
}

TEST_CASE("variants")
{
    std::mt19937_64 rng(3);
    const auto pool = random_pool(rng, 200);
    std::mt19937_64 a(1), b(1);
    CHECK(select_windows(pool, 0.1, 5, uncertainty_order::least_margin, selection_variant::full, a) == sample_selection(pool, 0.1, 5));

    // uncertainty only: one sort of the whole pool
    const auto we = select_windows(pool, 0.1, 7, uncertainty_order::least_margin, selection_variant::uncertainty_only, a);
    CHECK(we == brute_force(pool, 1.0, 7, true));

    // random second stage stays inside stage 1
    const auto stage1 = sample_selection(pool, 0.1, first_stage_size(200, 0.1));
    const auto wu = select_windows(pool, 0.1, 5, uncertainty_order::least_margin, selection_variant::random_second_stage, a);
    CHECK(wu.size() == 5);
    for (auto w : wu) CHECK(std::find(stage1.begin(), stage1.end(), w) != stage1.end());

    const auto wa1 = select_windows(pool, 0.1, 30, uncertainty_order::least_margin, selection_variant::random_quota, b);
    CHECK(wa1.size() == 30);
    auto sorted = wa1;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    std::mt19937_64 c(1);
    CHECK(select_windows(pool, 0.1, 30, uncertainty_order::least_margin, selection_variant::random_quota, c) == wa1);
}

TEST_CASE("score table round trip")
{
    std::mt19937_64 rng(4);
    const auto pool = random_pool(rng, 20);
    const auto path = std::filesystem::temp_directory_path() / "logaction-test-scores.tsv";
    write_scores(path, pool, "d1");
    CHECK(read_scores(path) == pool);
    std::filesystem::remove(path);
}
