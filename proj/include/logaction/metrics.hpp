#pragma once
#include <cstddef>
#include <span>
#include <string>

namespace logaction {

// Degenerate denominators resolve to 0: no predicted positives gives
// precision 0, no actual positives gives recall 0, and F1 is 0 whenever
// precision + recall is 0.
struct metrics_report
{
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0;
    std::string experiment_id;
    std::size_t round = 0;
    double budget_fraction = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const metrics_report&) const = default;
};

/// Label 1 is the positive (anomalous) class.
metrics_report compute_metrics(std::span<const int> predictions, std::span<const int> truths);

} // namespace logaction
