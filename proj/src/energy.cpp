#include <logaction/checkpoint.hpp>
#include <logaction/energy.hpp>
#include <logaction/hashing.hpp>

#include <algorithm>
#include <numeric>

namespace logaction {
namespace {

matrix_type gather(const matrix_type& v, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end)
{
    matrix_type out(v.rows(), static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) out.col(static_cast<Eigen::Index>(i - begin)) = v.col(static_cast<Eigen::Index>(idx[i]));
    return out;
}

struct alignment_term
{
    const matrix_type* unlabeled = nullptr;
    const matrix_type* source = nullptr;
    double weight = 0;
};

classifier_training_result run_training(energy_classifier<double> c, const matrix_type& vectors,
                                        const std::vector<int>& labels, const alignment_term& align,
                                        const training_schedule& schedule)
{
    if (static_cast<std::size_t>(vectors.cols()) != labels.size()) throw shape_error("one label per vector required");
    if (vectors.rows() != c.input_dim()) throw shape_error("vector width does not match classifier input");
    const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
    const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
    if (!has0 || !has1) throw training_error("classifier training data holds a single class");

    const bool aligning = align.weight != 0 && align.unlabeled && align.unlabeled->cols() > 0;
    const auto n = labels.size();
    const auto batch = static_cast<std::size_t>(std::max(1, std::min<int>(schedule.batch_size, static_cast<int>(n))));

    classifier_training_result out;
    nn::adam<double> opt(c.parameters().size(), schedule.learning_rate);
    std::mt19937_64 rng(schedule.seed);
    std::mt19937_64 unlabeled_rng(derive_seed(schedule.seed, "unlabeled-batches"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        double source_mean_f = 0;
        if (aligning) source_mean_f = free_energies<double>(c.forward(*align.source)).mean();
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const auto end = std::min(n, start + batch);
            typename energy_classifier<double>::tape tp;
            const matrix_type e = c.forward(gather(vectors, order, start, end), &tp);
            std::vector<int> ys(end - start);
            for (std::size_t i = start; i < end; ++i) ys[i - start] = labels[order[i]];
            matrix_type de;
            double loss = energy_cross_entropy<double>(e, ys, &de);
            vector_type grad = c.backward(tp, de);

            if (aligning) {
                const auto u = static_cast<std::size_t>(align.unlabeled->cols());
                std::uniform_int_distribution<std::size_t> pick(0, u - 1);
                std::vector<std::size_t> idx(std::min(batch, u));
                for (auto& i : idx) i = pick(unlabeled_rng);
                typename energy_classifier<double>::tape tu;
                const matrix_type eu = c.forward(gather(*align.unlabeled, idx, 0, idx.size()), &tu);
                matrix_type deu;
                loss += align.weight * free_energy_hinge<double>(eu, source_mean_f, &deu);
                grad += align.weight * c.backward(tu, deu);
            }
            nn::clip_by_global_norm(grad, schedule.clip_norm);
            opt.step(c.parameters(), grad);
            epoch_loss += loss * static_cast<double>(end - start);
        }
        out.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    }
    out.classifier = std::move(c);
    return out;
}

} // namespace

std::size_t domain_copies(std::size_t source_count, std::size_t target_count)
{
    if (source_count == 0 || target_count == 0) return 1;
    return std::max<std::size_t>(1, source_count / target_count);
}

classifier_training_result train_source(const matrix_type& vectors, const std::vector<int>& labels,
                                        energy_classifier<double> init, const training_schedule& schedule)
{
    init.set_phase(classifier_phase::source);
    return run_training(std::move(init), vectors, labels, {}, schedule);
}

classifier_training_result finetune(const energy_classifier<double>& source_classifier, const finetune_inputs& in,
                                    double align_weight, const training_schedule& schedule)
{
    if (!in.target_vectors || !in.target_labels || in.target_labels->empty()) {
        throw contract_error("fine-tuning needs at least one labeled target vector");
    }
    const Eigen::Index ns = in.source_vectors ? in.source_vectors->cols() : 0;
    const Eigen::Index nt = in.target_vectors->cols();
    const Eigen::Index copies = domain_copies(static_cast<std::size_t>(ns), static_cast<std::size_t>(nt));
    matrix_type pool(source_classifier.input_dim(), ns + copies * nt);
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(pool.cols()));
    if (ns > 0) {
        pool.leftCols(ns) = *in.source_vectors;
        labels.insert(labels.end(), in.source_labels->begin(), in.source_labels->end());
    }
    for (Eigen::Index k = 0; k < copies; ++k) {
        pool.middleCols(ns + k * nt, nt) = *in.target_vectors;
        labels.insert(labels.end(), in.target_labels->begin(), in.target_labels->end());
    }

    alignment_term align;
    align.unlabeled = in.unlabeled_vectors;
    align.weight = align_weight;
    // Without source data the labeled target pool stands in as the reference.
    align.source = ns > 0 ? in.source_vectors : in.target_vectors;

    auto c = source_classifier;
    c.set_phase(classifier_phase::target);
    return run_training(std::move(c), pool, labels, align, schedule);
}

double training_accuracy(const energy_classifier<double>& c, const matrix_type& vectors, const std::vector<int>& labels)
{
    const matrix_type e = c.forward(vectors);
    std::size_t hits = 0;
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
        hits += predict(energy_pair<double>{e(0, j), e(1, j)}) == labels[static_cast<std::size_t>(j)];
    }
    return labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(labels.size());
}

void save_classifier(const std::filesystem::path& path, const energy_classifier<double>& c, const std::string& digest)
{
    checkpoint ck;
    ck.meta = {{"kind", "classifier"},
               {"input", c.input_dim()},
               {"hidden", c.hidden()},
               {"layer", c.layer()},
               {"seed", c.seed()},
               {"phase", c.phase() == classifier_phase::source ? "source" : "target"},
               {"digest", digest}};
    ck.arrays = {{"psi", c.parameters()}};
    ck.save(path);
}

energy_classifier<double> load_classifier(const std::filesystem::path& path)
{
    const auto ck = checkpoint::load(path);
    try {
        if (ck.meta.at("kind") != "classifier") throw load_error("checkpoint is not a classifier: " + path.string());
        energy_classifier<double> c(ck.meta.at("input"), ck.meta.at("hidden"), ck.meta.at("layer"), ck.meta.at("seed"));
        const auto& psi = ck.array("psi");
        if (psi.size() != c.parameters().size()) throw load_error("classifier checkpoint size mismatch");
        c.parameters() = psi;
        c.set_phase(ck.meta.at("phase") == "source" ? classifier_phase::source : classifier_phase::target);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw load_error(std::string("bad classifier checkpoint metadata: ") + e.what());
    }
}

} // namespace logaction
