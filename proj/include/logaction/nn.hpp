#pragma once
#include <logaction/types.hpp>

#include <cmath>
#include <concepts>
#include <random>

namespace logaction::nn {

template <std::floating_point Scalar>
inline Scalar sigmoid(Scalar x)
{
    if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

// log(1 + e^x) without overflow
template <std::floating_point Scalar>
inline Scalar softplus(Scalar x)
{
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <class Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x)
{
    using S = typename Derived::Scalar;
    return x.unaryExpr([](S v) { return sigmoid(v); });
}

template <class Derived>
auto softplus(const Eigen::MatrixBase<Derived>& x)
{
    using S = typename Derived::Scalar;
    return x.unaryExpr([](S v) { return softplus(v); });
}

template <class Derived>
auto relu(const Eigen::MatrixBase<Derived>& x)
{
    return x.cwiseMax(typename Derived::Scalar(0));
}

template <class Derived>
auto relu_mask(const Eigen::MatrixBase<Derived>& x)
{
    using S = typename Derived::Scalar;
    return x.unaryExpr([](S v) { return v > 0 ? S(1) : S(0); });
}

// Scales g in place so that ||g|| <= max_norm. Returns the norm before clipping.
template <class Scalar>
Scalar clip_by_global_norm(vector_t<Scalar>& g, Scalar max_norm)
{
    const Scalar n = g.norm();
    if (max_norm > 0 && n > max_norm) g *= max_norm / n;
    return n;
}

template <class Scalar>
class adam
{
public:
    adam(Eigen::Index size, Scalar learning_rate, Scalar beta1 = 0.9, Scalar beta2 = 0.999, Scalar epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon),
          m_(vector_t<Scalar>::Zero(size)), v_(vector_t<Scalar>::Zero(size))
    {}

    void step(Eigen::Ref<vector_t<Scalar>> params, const vector_t<Scalar>& grad)
    {
        ++t_;
        m_ = beta1_ * m_ + (1 - beta1_) * grad;
        v_ = beta2_ * v_ + (1 - beta2_) * grad.cwiseAbs2();
        const Scalar c1 = 1 - std::pow(beta1_, static_cast<Scalar>(t_));
        const Scalar c2 = 1 - std::pow(beta2_, static_cast<Scalar>(t_));
        params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }

    long steps() const { return t_; }

private:
    Scalar lr_, beta1_, beta2_, eps_;
    vector_t<Scalar> m_, v_;
    long t_ = 0;
};

// U(-bound, bound) fill from a seeded engine.
template <class Scalar>
void uniform_fill(Eigen::Ref<vector_t<Scalar>> out, Scalar bound, std::mt19937_64& rng)
{
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        out[i] = static_cast<Scalar>((2 * u - 1) * bound);
    }
}

} // namespace logaction::nn
