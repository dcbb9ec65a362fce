#include <logaction/metrics.hpp>
#include <logaction/types.hpp>

namespace logaction {

metrics_report compute_metrics(std::span<const int> predictions, std::span<const int> truths)
{
    if (predictions.size() != truths.size()) throw shape_error("prediction and truth lengths differ");
    if (predictions.empty()) throw contract_error("metrics over an empty test set");
    metrics_report m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool p = predictions[i] == 1;
        const bool t = truths[i] == 1;
        if (p && t) ++m.tp;
        else if (p) ++m.fp;
        else if (t) ++m.fn;
        else ++m.tn;
    }
    const auto tp = static_cast<double>(m.tp);
    m.precision = m.tp + m.fp ? tp / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn ? tp / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

} // namespace logaction
