#pragma once
#include <logaction/nn.hpp>
#include <logaction/sequencing.hpp>
#include <logaction/types.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace logaction {

class training_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Stacked LSTM mapping a t x d_w window to the final hidden state of the top
/// layer (the log vector). All weights live in one flat vector; per-layer
/// blocks are views into it, laid out as [W_x | W_h | b] per layer with gate
/// rows ordered (input, forget, cell, output).
template <class Scalar>
class lstm_encoder
{
public:
    using vector = vector_t<Scalar>;
    using matrix = matrix_t<Scalar>;

    lstm_encoder() = default;

    lstm_encoder(int input_dim, int hidden, int layers, std::uint64_t seed)
        : input_dim_(input_dim), hidden_(hidden), layers_(layers), seed_(seed)
    {
        if (input_dim < 1 || hidden < 1 || layers < 1) throw std::invalid_argument("encoder dimensions must be positive");
        params_.resize(parameter_count(input_dim, hidden, layers));
        std::mt19937_64 rng(seed);
        nn::uniform_fill<Scalar>(params_, Scalar(1) / std::sqrt(static_cast<Scalar>(hidden)), rng);
    }

    static lstm_encoder zeros(int input_dim, int hidden, int layers)
    {
        lstm_encoder e(input_dim, hidden, layers, 0);
        e.params_.setZero();
        return e;
    }

    static Eigen::Index parameter_count(int input_dim, int hidden, int layers)
    {
        Eigen::Index n = 0;
        for (int l = 0; l < layers; ++l) n += layer_size(l == 0 ? input_dim : hidden, hidden);
        return n;
    }

    int input_dim() const { return input_dim_; }
    int hidden() const { return hidden_; }
    int layers() const { return layers_; }
    int output_dim() const { return hidden_; }
    std::uint64_t seed() const { return seed_; }

    vector& parameters() { return params_; }
    const vector& parameters() const { return params_; }

    Eigen::Map<const matrix> input_weights(int l) const { return {params_.data() + offset(l), 4 * hidden_, in_dim(l)}; }
    Eigen::Map<const matrix> recurrent_weights(int l) const
    {
        return {params_.data() + offset(l) + 4 * hidden_ * in_dim(l), 4 * hidden_, hidden_};
    }
    Eigen::Map<const vector> bias(int l) const
    {
        return {params_.data() + offset(l) + 4 * hidden_ * (in_dim(l) + hidden_), 4 * hidden_};
    }

    struct layer_tape
    {
        std::vector<matrix> gates; // activated i,f,g,o stacked, 4h x B
        std::vector<matrix> cells; // c_k, h x B
        std::vector<matrix> outputs; // h_k, h x B
    };
    struct tape
    {
        const std::vector<matrix>* inputs = nullptr;
        std::vector<layer_tape> layers;
    };

    /// steps[k] holds step k of every batch member column-wise (d_w x B).
    matrix forward(const std::vector<matrix>& steps, tape* tp = nullptr) const
    {
        if (steps.empty()) throw shape_error("encoder input has no time steps");
        const auto batch = steps.front().cols();
        for (const auto& s : steps) {
            if (s.rows() != input_dim_ || s.cols() != batch) throw shape_error("encoder input step has wrong shape");
        }
        if (tp) {
            tp->inputs = &steps;
            tp->layers.assign(static_cast<std::size_t>(layers_), {});
        }
        const std::vector<matrix>* in = &steps;
        std::vector<matrix> below;
        const int h = hidden_;
        for (int l = 0; l < layers_; ++l) {
            const auto wx = input_weights(l);
            const auto wh = recurrent_weights(l);
            const auto b = bias(l);
            std::vector<matrix> outs;
            outs.reserve(in->size());
            matrix hprev = matrix::Zero(h, batch);
            matrix cprev = matrix::Zero(h, batch);
            for (const auto& x : *in) {
                matrix a = wx * x + wh * hprev;
                a.colwise() += b;
                a.topRows(2 * h) = nn::sigmoid(a.topRows(2 * h));
                a.middleRows(2 * h, h) = a.middleRows(2 * h, h).array().tanh().matrix();
                a.bottomRows(h) = nn::sigmoid(a.bottomRows(h));
                matrix c = a.middleRows(h, h).cwiseProduct(cprev) + a.topRows(h).cwiseProduct(a.middleRows(2 * h, h));
                matrix hk = a.bottomRows(h).cwiseProduct(c.array().tanh().matrix());
                if (tp) {
                    auto& lt = tp->layers[static_cast<std::size_t>(l)];
                    lt.gates.push_back(a);
                    lt.cells.push_back(c);
                }
                cprev = std::move(c);
                hprev = hk;
                outs.push_back(std::move(hk));
            }
            if (tp) tp->layers[static_cast<std::size_t>(l)].outputs = outs;
            below = std::move(outs);
            in = &below;
        }
        return below.back();
    }

    /// Gradient of a scalar objective w.r.t. the parameters, given its
    /// gradient w.r.t. the forward output (h x B).
    vector backward(const tape& tp, const matrix& d_output) const
    {
        using array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
        vector grad = vector::Zero(params_.size());
        const int h = hidden_;
        const auto steps = tp.layers.front().outputs.size();
        const auto batch = d_output.cols();

        // gradient w.r.t. each step's output of the current layer
        std::vector<matrix> d_out(steps, matrix::Zero(h, batch));
        d_out.back() = d_output;

        for (int l = layers_ - 1; l >= 0; --l) {
            const auto& lt = tp.layers[static_cast<std::size_t>(l)];
            const std::vector<matrix>& inputs = l == 0 ? *tp.inputs : tp.layers[static_cast<std::size_t>(l - 1)].outputs;
            const auto wx = input_weights(l);
            const auto wh = recurrent_weights(l);
            Eigen::Map<matrix> gwx(grad.data() + offset(l), 4 * h, in_dim(l));
            Eigen::Map<matrix> gwh(grad.data() + offset(l) + 4 * h * in_dim(l), 4 * h, h);
            Eigen::Map<vector> gb(grad.data() + offset(l) + 4 * h * (in_dim(l) + h), 4 * h);

            std::vector<matrix> d_in(steps);
            matrix dh_next = matrix::Zero(h, batch);
            matrix dc_next = matrix::Zero(h, batch);
            matrix da(4 * h, batch);
            for (std::size_t k = steps; k-- > 0;) {
                const matrix& g = lt.gates[k];
                const auto i_g = g.topRows(h).array();
                const auto f_g = g.middleRows(h, h).array();
                const auto c_g = g.middleRows(2 * h, h).array();
                const auto o_g = g.bottomRows(h).array();
                const array tc = lt.cells[k].array().tanh();
                const matrix cprev = k > 0 ? matrix(lt.cells[k - 1]) : matrix(matrix::Zero(h, batch));
                const matrix hprev = k > 0 ? matrix(lt.outputs[k - 1]) : matrix(matrix::Zero(h, batch));

                const array dh = (d_out[k] + dh_next).array();
                const array dc = dc_next.array() + dh * o_g * (1 - tc.square());
                da.topRows(h) = (dc * c_g * i_g * (1 - i_g)).matrix();
                da.middleRows(h, h) = (dc * cprev.array() * f_g * (1 - f_g)).matrix();
                da.middleRows(2 * h, h) = (dc * i_g * (1 - c_g.square())).matrix();
                da.bottomRows(h) = (dh * tc * o_g * (1 - o_g)).matrix();
                dc_next = (dc * f_g).matrix();

                gwx.noalias() += da * inputs[k].transpose();
                gwh.noalias() += da * hprev.transpose();
                gb += da.rowwise().sum();
                if (l > 0) d_in[k] = wx.transpose() * da;
                dh_next = wh.transpose() * da;
            }
            if (l > 0) d_out = std::move(d_in);
        }
        return grad;
    }

    vector encode(const matrix& sequence) const
    {
        if (sequence.cols() != input_dim_) throw shape_error("window width does not match encoder input size");
        std::vector<matrix> steps;
        steps.reserve(static_cast<std::size_t>(sequence.rows()));
        for (Eigen::Index k = 0; k < sequence.rows(); ++k) steps.push_back(sequence.row(k).transpose());
        return forward(steps).col(0);
    }

    bool operator==(const lstm_encoder& o) const
    {
        return input_dim_ == o.input_dim_ && hidden_ == o.hidden_ && layers_ == o.layers_ && params_ == o.params_;
    }

private:
    static Eigen::Index layer_size(int in, int hidden) { return 4 * hidden * (in + hidden + 1); }
    int in_dim(int l) const { return l == 0 ? input_dim_ : hidden_; }
    Eigen::Index offset(int l) const
    {
        Eigen::Index n = 0;
        for (int k = 0; k < l; ++k) n += layer_size(in_dim(k), hidden_);
        return n;
    }

    int input_dim_ = 0;
    int hidden_ = 0;
    int layers_ = 0;
    std::uint64_t seed_ = 0;
    vector params_;
};

/// Affine map r -> 1 followed by a sigmoid; output is P(class 0 | V).
/// Parameters: [w (r) | b].
template <class Scalar>
class discriminator
{
public:
    using vector = vector_t<Scalar>;
    using matrix = matrix_t<Scalar>;

    discriminator() = default;
    explicit discriminator(int input_dim) : params_(vector::Zero(input_dim + 1)) {}
    discriminator(int input_dim, std::uint64_t seed) : params_(input_dim + 1)
    {
        std::mt19937_64 rng(seed);
        nn::uniform_fill<Scalar>(params_, Scalar(1) / std::sqrt(static_cast<Scalar>(input_dim)), rng);
    }

    int input_dim() const { return static_cast<int>(params_.size()) - 1; }
    vector& parameters() { return params_; }
    const vector& parameters() const { return params_; }
    auto weights() const { return params_.head(params_.size() - 1); }
    Scalar bias() const { return params_[params_.size() - 1]; }

    // logits, 1 x B
    matrix logits(const matrix& v) const
    {
        if (v.rows() != input_dim()) throw shape_error("log vector width does not match discriminator");
        return (weights().transpose() * v).array() + bias();
    }

    Scalar operator()(const vector& v) const { return nn::sigmoid(logits(v)(0, 0)); }

    bool operator==(const discriminator& o) const { return params_ == o.params_; }

private:
    vector params_;
};

/// Mean binary cross-entropy with y' read as P(class 0):
/// L = mean of -[(1 - y) log y' + y log(1 - y')].
template <class Scalar>
Scalar binary_cross_entropy(std::span<const Scalar> class0_probability, std::span<const int> labels)
{
    if (class0_probability.empty()) throw contract_error("cross-entropy over an empty batch");
    if (class0_probability.size() != labels.size()) throw shape_error("probability and label counts differ");
    Scalar sum = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const Scalar p = class0_probability[i];
        sum -= labels[i] == 0 ? std::log(p) : std::log1p(-p);
    }
    return sum / static_cast<Scalar>(labels.size());
}

template <class Scalar>
struct objective_value
{
    Scalar loss = 0;
    vector_t<Scalar> encoder_gradient;
    vector_t<Scalar> discriminator_gradient;
};

/// Contrastive objective on one batch; gradients are only filled when asked.
template <class Scalar>
objective_value<Scalar> contrastive_objective(const lstm_encoder<Scalar>& enc,
                                              const discriminator<Scalar>& disc,
                                              const std::vector<matrix_t<Scalar>>& steps,
                                              std::span<const int> labels,
                                              bool with_gradient = true)
{
    using matrix = matrix_t<Scalar>;
    if (labels.empty()) throw contract_error("contrastive loss over an empty batch");
    if (steps.empty() || steps.front().cols() != static_cast<Eigen::Index>(labels.size())) {
        throw shape_error("batch size does not match label count");
    }
    typename lstm_encoder<Scalar>::tape tp;
    const matrix v = enc.forward(steps, with_gradient ? &tp : nullptr);
    const matrix z = disc.logits(v);
    const auto n = static_cast<Scalar>(labels.size());

    objective_value<Scalar> out;
    matrix dz(1, z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const Scalar y = static_cast<Scalar>(labels[static_cast<std::size_t>(j)]);
        // -(1-y) log sigmoid(z) - y log(1 - sigmoid(z))
        out.loss += (1 - y) * nn::softplus(-z(0, j)) + y * nn::softplus(z(0, j));
        dz(0, j) = (nn::sigmoid(z(0, j)) - (1 - y)) / n;
    }
    out.loss /= n;
    if (!with_gradient) return out;

    out.discriminator_gradient.resize(disc.parameters().size());
    out.discriminator_gradient.head(v.rows()) = v * dz.transpose();
    out.discriminator_gradient[v.rows()] = dz.sum();
    const matrix dv = disc.weights() * dz;
    out.encoder_gradient = enc.backward(tp, dv);
    return out;
}

/// Column-wise step matrices for a batch of windows (all of equal length).
template <class Scalar>
std::vector<matrix_t<Scalar>> batch_steps(std::span<const log_sequence* const> windows)
{
    if (windows.empty()) throw contract_error("empty window batch");
    const auto t = windows.front()->length();
    const auto d = windows.front()->embeddings->cols();
    std::vector<matrix_t<Scalar>> steps(t, matrix_t<Scalar>(d, static_cast<Eigen::Index>(windows.size())));
    for (std::size_t j = 0; j < windows.size(); ++j) {
        if (windows[j]->length() != t) throw shape_error("windows in a batch must have equal length");
        for (std::size_t k = 0; k < t; ++k) {
            steps[k].col(static_cast<Eigen::Index>(j)) = windows[j]->row(k).transpose().template cast<Scalar>();
        }
    }
    return steps;
}

struct training_schedule
{
    int epochs = 60;
    int batch_size = 512;
    double learning_rate = 1e-3;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;
};

struct labeled_window
{
    const log_sequence* window = nullptr;
    int y = 0; // 0 normal class, 1 anomalous class
};

template <class Scalar>
struct encoder_training_result
{
    lstm_encoder<Scalar> encoder;
    discriminator<Scalar> disc;
    Scalar initial_loss = 0;          // full pool, before the first step
    Scalar final_loss = 0;            // full pool, after the last step
    std::vector<Scalar> epoch_losses; // mean batch loss per epoch
};

template <class Scalar>
Scalar pool_loss(const lstm_encoder<Scalar>& enc, const discriminator<Scalar>& disc,
                 std::span<const labeled_window> pool, int batch_size)
{
    Scalar total = 0;
    for (std::size_t start = 0; start < pool.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(pool.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const log_sequence*> ws;
        std::vector<int> ys;
        for (std::size_t i = start; i < end; ++i) {
            ws.push_back(pool[i].window);
            ys.push_back(pool[i].y);
        }
        const auto steps = batch_steps<Scalar>(ws);
        total += contrastive_objective(enc, disc, steps, ys, false).loss * static_cast<Scalar>(ys.size());
    }
    return total / static_cast<Scalar>(pool.size());
}

/// Minibatch Adam on the contrastive objective over the union pool.
template <class Scalar>
encoder_training_result<Scalar> train_encoder(std::span<const labeled_window> pool,
                                              lstm_encoder<Scalar> enc,
                                              discriminator<Scalar> disc,
                                              const training_schedule& schedule)
{
    if (pool.empty()) throw training_error("encoder training pool is empty");
    const bool has0 = std::any_of(pool.begin(), pool.end(), [](const auto& p) { return p.y == 0; });
    const bool has1 = std::any_of(pool.begin(), pool.end(), [](const auto& p) { return p.y == 1; });
    if (!has0 || !has1) throw training_error("encoder training pool holds a single class");

    const int batch = std::max(1, std::min<int>(schedule.batch_size, static_cast<int>(pool.size())));
    encoder_training_result<Scalar> out;
    out.initial_loss = pool_loss(enc, disc, pool, batch);

    nn::adam<Scalar> opt_enc(enc.parameters().size(), static_cast<Scalar>(schedule.learning_rate));
    nn::adam<Scalar> opt_disc(disc.parameters().size(), static_cast<Scalar>(schedule.learning_rate));
    std::mt19937_64 rng(schedule.seed);
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const auto n_enc = enc.parameters().size();
    vector_t<Scalar> grad(n_enc + disc.parameters().size());
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        Scalar epoch_loss = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch));
            std::vector<const log_sequence*> ws;
            std::vector<int> ys;
            for (std::size_t i = start; i < end; ++i) {
                ws.push_back(pool[order[i]].window);
                ys.push_back(pool[order[i]].y);
            }
            const auto steps = batch_steps<Scalar>(ws);
            auto obj = contrastive_objective(enc, disc, steps, ys);
            grad << obj.encoder_gradient, obj.discriminator_gradient;
            nn::clip_by_global_norm(grad, static_cast<Scalar>(schedule.clip_norm));
            opt_enc.step(enc.parameters(), grad.head(n_enc));
            opt_disc.step(disc.parameters(), grad.tail(disc.parameters().size()));
            epoch_loss += obj.loss * static_cast<Scalar>(ys.size());
        }
        out.epoch_losses.push_back(epoch_loss / static_cast<Scalar>(pool.size()));
    }
    out.final_loss = schedule.epochs > 0 ? pool_loss(enc, disc, pool, batch) : out.initial_loss;
    out.encoder = std::move(enc);
    out.disc = std::move(disc);
    return out;
}

/// Log vectors for many windows, one column each.
template <class Scalar>
matrix_t<Scalar> encode_windows(const lstm_encoder<Scalar>& enc, std::span<const log_sequence* const> windows,
                                std::size_t batch = 512)
{
    matrix_t<Scalar> out(enc.output_dim(), static_cast<Eigen::Index>(windows.size()));
    for (std::size_t start = 0; start < windows.size(); start += batch) {
        const auto end = std::min(windows.size(), start + batch);
        const auto steps = batch_steps<Scalar>(windows.subspan(start, end - start));
        out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) = enc.forward(steps);
    }
    return out;
}

std::vector<const log_sequence*> pointers(const std::vector<log_sequence>& windows);

struct log_vector
{
    std::size_t window_index = 0;
    origin_type origin = origin_type::source;
    std::optional<int> label;
    vector_type values;
    bool operator==(const log_vector&) const = default;
};

std::vector<log_vector> export_vectors(const std::vector<log_sequence>& windows, const lstm_encoder<double>& enc,
                                       bool with_labels = true);

// logaction-vectors v1 digest=<d>
// <window_index>\t<origin>\t<label or ->\t<v1 v2 ...>
void write_vectors(const std::filesystem::path& path, const std::vector<log_vector>& rows, const std::string& digest);
std::vector<log_vector> read_vectors(const std::filesystem::path& path);

void save_encoder(const std::filesystem::path& path, const lstm_encoder<double>& enc, const discriminator<double>& disc,
                  int epoch, const std::string& digest);
std::pair<lstm_encoder<double>, discriminator<double>> load_encoder(const std::filesystem::path& path);

} // namespace logaction
