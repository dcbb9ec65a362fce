#pragma once
#include <logaction/encoder.hpp>
#include <logaction/nn.hpp>
#include <logaction/types.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace logaction {

template <class Scalar>
struct energy_pair
{
    Scalar e0 = 0; // normal
    Scalar e1 = 0; // anomalous
    bool operator==(const energy_pair&) const = default;
};

class degenerate_energy_error : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

// How class probabilities are read off the energies. energy_ratio is
// P(V,l) = E(V,l) / sum E; boltzmann is softmax(-E).
enum class probability_rule
{
    energy_ratio,
    boltzmann
};

/// F = -log(exp(-e0) + exp(-e1)), via min(e) - log1p(exp(-|e0 - e1|)).
template <class Scalar>
Scalar free_energy(const energy_pair<Scalar>& p)
{
    const Scalar lo = std::min(p.e0, p.e1);
    return lo - std::log1p(std::exp(-std::abs(p.e0 - p.e1)));
}

/// Argmin energy; ties go to label 0.
template <class Scalar>
int predict(const energy_pair<Scalar>& p)
{
    return p.e1 < p.e0 ? 1 : 0;
}

template <class Scalar>
std::pair<Scalar, Scalar> class_probabilities(const energy_pair<Scalar>& p,
                                              probability_rule rule = probability_rule::energy_ratio)
{
    if (rule == probability_rule::boltzmann) {
        const Scalar p0 = nn::sigmoid(p.e1 - p.e0);
        return {p0, 1 - p0};
    }
    const Scalar sum = p.e0 + p.e1;
    if (!(sum > 0)) throw degenerate_energy_error("both energies are zero; class probabilities undefined");
    return {p.e0 / sum, p.e1 / sum};
}

/// |P(V,0) - P(V,1)|: 0 when the classes are indistinguishable, 1 when certain.
template <class Scalar>
Scalar uncertainty(const energy_pair<Scalar>& p, probability_rule rule = probability_rule::energy_ratio)
{
    const auto [p0, p1] = class_probabilities(p, rule);
    return std::abs(p0 - p1);
}

enum class classifier_phase
{
    source,
    target
};

/// Feed-forward energy network r -> hidden -> layer -> 2 with ReLU hidden
/// units and a final softplus, so both energies are non-negative.
/// Flat parameter layout: [W1 | b1 | W2 | b2 | W3 | b3].
template <class Scalar>
class energy_classifier
{
public:
    using vector = vector_t<Scalar>;
    using matrix = matrix_t<Scalar>;

    energy_classifier() = default;

    energy_classifier(int input_dim, int hidden, int layer, std::uint64_t seed)
        : input_(input_dim), hidden_(hidden), layer_(layer), seed_(seed)
    {
        if (input_dim < 1 || hidden < 1 || layer < 1) throw std::invalid_argument("classifier dimensions must be positive");
        params_.resize(parameter_count(input_dim, hidden, layer));
        std::mt19937_64 rng(seed);
        nn::uniform_fill<Scalar>(block(0, hidden_ * (input_ + 1)), 1 / std::sqrt(Scalar(input_)), rng);
        nn::uniform_fill<Scalar>(block(hidden_ * (input_ + 1), layer_ * (hidden_ + 1)), 1 / std::sqrt(Scalar(hidden_)), rng);
        nn::uniform_fill<Scalar>(block(hidden_ * (input_ + 1) + layer_ * (hidden_ + 1), 2 * (layer_ + 1)),
                                 1 / std::sqrt(Scalar(layer_)), rng);
    }

    static energy_classifier zeros(int input_dim, int hidden, int layer)
    {
        energy_classifier c(input_dim, hidden, layer, 0);
        c.params_.setZero();
        return c;
    }

    static Eigen::Index parameter_count(int input_dim, int hidden, int layer)
    {
        return hidden * (input_dim + 1) + layer * (hidden + 1) + 2 * (layer + 1);
    }

    int input_dim() const { return input_; }
    int hidden() const { return hidden_; }
    int layer() const { return layer_; }
    std::uint64_t seed() const { return seed_; }
    classifier_phase phase() const { return phase_; }
    void set_phase(classifier_phase p) { phase_ = p; }

    vector& parameters() { return params_; }
    const vector& parameters() const { return params_; }

    Eigen::Map<const matrix> w1() const { return {params_.data(), hidden_, input_}; }
    Eigen::Map<const vector> b1() const { return {params_.data() + hidden_ * input_, hidden_}; }
    Eigen::Map<const matrix> w2() const { return {params_.data() + off2(), layer_, hidden_}; }
    Eigen::Map<const vector> b2() const { return {params_.data() + off2() + layer_ * hidden_, layer_}; }
    Eigen::Map<const matrix> w3() const { return {params_.data() + off3(), 2, layer_}; }
    Eigen::Map<const vector> b3() const { return {params_.data() + off3() + 2 * layer_, 2}; }

    struct tape
    {
        matrix input, z1, a1, z2, a2, z3;
    };

    /// Energies for each column of v: row 0 = E(V,0), row 1 = E(V,1).
    matrix forward(const matrix& v, tape* tp = nullptr) const
    {
        if (v.rows() != input_) throw shape_error("log vector width does not match classifier input");
        matrix z1 = (w1() * v).colwise() + b1();
        matrix a1 = nn::relu(z1);
        matrix z2 = (w2() * a1).colwise() + b2();
        matrix a2 = nn::relu(z2);
        matrix z3 = (w3() * a2).colwise() + b3();
        matrix e = nn::softplus(z3);
        if (tp) *tp = tape{v, std::move(z1), std::move(a1), std::move(z2), std::move(a2), std::move(z3)};
        return e;
    }

    vector backward(const tape& tp, const matrix& d_energy) const
    {
        vector grad(params_.size());
        const matrix dz3 = d_energy.cwiseProduct(nn::sigmoid(tp.z3));
        Eigen::Map<matrix>(grad.data() + off3(), 2, layer_) = dz3 * tp.a2.transpose();
        Eigen::Map<vector>(grad.data() + off3() + 2 * layer_, 2) = dz3.rowwise().sum();
        const matrix dz2 = (w3().transpose() * dz3).cwiseProduct(nn::relu_mask(tp.z2));
        Eigen::Map<matrix>(grad.data() + off2(), layer_, hidden_) = dz2 * tp.a1.transpose();
        Eigen::Map<vector>(grad.data() + off2() + layer_ * hidden_, layer_) = dz2.rowwise().sum();
        const matrix dz1 = (w2().transpose() * dz2).cwiseProduct(nn::relu_mask(tp.z1));
        Eigen::Map<matrix>(grad.data(), hidden_, input_) = dz1 * tp.input.transpose();
        Eigen::Map<vector>(grad.data() + hidden_ * input_, hidden_) = dz1.rowwise().sum();
        return grad;
    }

    energy_pair<Scalar> energies(const vector& v) const
    {
        const matrix e = forward(v);
        return {e(0, 0), e(1, 0)};
    }

    bool operator==(const energy_classifier& o) const
    {
        return input_ == o.input_ && hidden_ == o.hidden_ && layer_ == o.layer_ && params_ == o.params_;
    }

private:
    Eigen::Map<vector> block(Eigen::Index start, Eigen::Index n) { return {params_.data() + start, n}; }
    Eigen::Index off2() const { return hidden_ * (input_ + 1); }
    Eigen::Index off3() const { return off2() + layer_ * (hidden_ + 1); }

    int input_ = 0;
    int hidden_ = 0;
    int layer_ = 0;
    std::uint64_t seed_ = 0;
    classifier_phase phase_ = classifier_phase::source;
    vector params_;
};

/// Free energies of each column of a 2 x B energy matrix.
template <class Scalar>
vector_t<Scalar> free_energies(const matrix_t<Scalar>& e)
{
    vector_t<Scalar> f(e.cols());
    for (Eigen::Index j = 0; j < e.cols(); ++j) f[j] = free_energy(energy_pair<Scalar>{e(0, j), e(1, j)});
    return f;
}

/// Cross-entropy of softmax(-E) against labels (= E(V,y) - F(V)), averaged,
/// and its gradient w.r.t. the energies (already scaled by 1/B).
template <class Scalar>
Scalar energy_cross_entropy(const matrix_t<Scalar>& e, std::span<const int> labels, matrix_t<Scalar>* d_energy)
{
    const auto n = static_cast<Scalar>(labels.size());
    Scalar loss = 0;
    if (d_energy) d_energy->resize(2, e.cols());
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
        const energy_pair<Scalar> p{e(0, j), e(1, j)};
        const int y = labels[static_cast<std::size_t>(j)];
        loss += (y == 0 ? p.e0 : p.e1) - free_energy(p);
        if (d_energy) {
            const Scalar q0 = nn::sigmoid(p.e1 - p.e0); // softmax(-E)_0
            (*d_energy)(0, j) = ((y == 0 ? 1 : 0) - q0) / n;
            (*d_energy)(1, j) = ((y == 1 ? 1 : 0) - (1 - q0)) / n;
        }
    }
    return loss / n;
}

/// Mean hinge max(0, F(V) - reference) over columns, and its gradient.
template <class Scalar>
Scalar free_energy_hinge(const matrix_t<Scalar>& e, Scalar reference, matrix_t<Scalar>* d_energy)
{
    const auto n = static_cast<Scalar>(e.cols());
    Scalar loss = 0;
    if (d_energy) d_energy->setZero(2, e.cols());
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
        const energy_pair<Scalar> p{e(0, j), e(1, j)};
        const Scalar gap = free_energy(p) - reference;
        if (gap <= 0) continue;
        loss += gap;
        if (d_energy) {
            const Scalar q0 = nn::sigmoid(p.e1 - p.e0);
            (*d_energy)(0, j) = q0 / n;
            (*d_energy)(1, j) = (1 - q0) / n;
        }
    }
    return loss / n;
}

struct classifier_training_result
{
    energy_classifier<double> classifier;
    std::vector<double> epoch_losses;
};

/// Source-phase training: minibatch Adam on the energy cross-entropy.
/// vectors holds one log vector per column.
classifier_training_result train_source(const matrix_type& vectors, const std::vector<int>& labels,
                                        energy_classifier<double> init, const training_schedule& schedule);

/// How often each labeled target item is repeated in a combined source and
/// target training pool so that both domains carry about equal weight.
std::size_t domain_copies(std::size_t source_count, std::size_t target_count);

struct finetune_inputs
{
    const matrix_type* source_vectors = nullptr;
    const std::vector<int>* source_labels = nullptr;
    const matrix_type* target_vectors = nullptr; // labeled target
    const std::vector<int>* target_labels = nullptr;
    const matrix_type* unlabeled_vectors = nullptr;
};

/// Continues training from a source classifier on source plus labeled target
/// windows (target repeated per domain_copies), adding align_weight times the mean hinge of unlabeled target free
/// energy above the mean source free energy (refreshed each epoch).
classifier_training_result finetune(const energy_classifier<double>& source_classifier, const finetune_inputs& in,
                                    double align_weight, const training_schedule& schedule);

double training_accuracy(const energy_classifier<double>& c, const matrix_type& vectors, const std::vector<int>& labels);

void save_classifier(const std::filesystem::path& path, const energy_classifier<double>& c, const std::string& digest);
energy_classifier<double> load_classifier(const std::filesystem::path& path);

} // namespace logaction
