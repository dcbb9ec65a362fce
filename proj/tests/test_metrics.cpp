#include <logaction/metrics.hpp>

#include <doctest.h>

#include <random>

using namespace logaction;

TEST_CASE("hand confusion matrix")
{
    // tp=3, fp=1, fn=1, tn=5
    const std::vector<int> pred{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
    const std::vector<int> truth{1, 1, 1, 0, 1, 0, 0, 0, 0, 0};
    const auto m = compute_metrics(pred, truth);
    CHECK(m.tp == 3);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.tn == 5);
    CHECK(m.precision == 0.75);
    CHECK(m.recall == 0.75);
    CHECK(m.f1 == 0.75);
}

TEST_CASE("degenerate conventions")
{
    const std::vector<int> truth{1, 0, 1};
    CHECK(compute_metrics(truth, truth).f1 == 1.0);
    const auto none = compute_metrics(std::vector<int>{0, 0, 0}, truth);
    CHECK(none.precision == 0.0);
    CHECK(none.f1 == 0.0);
    CHECK_THROWS(compute_metrics(std::vector<int>{0}, truth));
}

TEST_CASE("matches naive counting")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(1 + rng() % 200);
        std::vector<int> p(n), t(n);
        std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = static_cast<int>(rng() % 2);
            t[i] = static_cast<int>(rng() % 2);
            if (p[i] && t[i]) ++tp;
            if (p[i] && !t[i]) ++fp;
            if (!p[i] && !t[i]) ++tn;
            if (!p[i] && t[i]) ++fn;
        }
        const auto m = compute_metrics(p, t);
        CHECK(m.tp == tp);
        CHECK(m.fp == fp);
        CHECK(m.tn == tn);
        CHECK(m.fn == fn);
        const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
        const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
        CHECK(m.precision == prec);
        CHECK(m.recall == rec);
        CHECK(m.f1 == (prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0));
    }
}
