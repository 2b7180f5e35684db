#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "opesel/rng.hpp"

namespace opesel::nn {

// Fixed subsampling-head architecture: (d + |A|) -> 100 -> 100 -> 1 with
// ReLU between layers and a sigmoid output. Templated on the scalar so the
// experiment path can run float GEMMs while gradient tests run in double.
inline constexpr int kHidden = 100;
inline constexpr double kRhoEps = 1e-6;  // sigmoid clamp; (1-rho)^2 appears in denominators

template <typename S>
struct Mlp {
    using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    int in_dim = 0;
    Matrix w1;  // hidden x in
    Vector b1;
    Matrix w2;  // hidden x hidden
    Vector b2;
    Vector w3;  // hidden
    S b3 = S(0);

    bool same_shape(const Mlp& o) const {
        return in_dim == o.in_dim && w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() &&
               w2.rows() == o.w2.rows() && w2.cols() == o.w2.cols() && w3.size() == o.w3.size();
    }

    bool all_finite() const {
        return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() && w3.allFinite() &&
               std::isfinite(static_cast<double>(b3));
    }
};

// He-scaled normal weights, zero biases.
template <typename S>
Mlp<S> init_mlp(int in_dim, std::uint64_t seed) {
    if (in_dim < 1) throw std::invalid_argument("init_mlp: in_dim must be >= 1");
    Rng rng(derive_seed(seed, {0x6d6c70ULL}));
    Mlp<S> p;
    p.in_dim = in_dim;
    auto fill = [&rng](auto& m, double fan_in) {
        const double s = std::sqrt(2.0 / fan_in);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<S>(rng.normal() * s);
    };
    p.w1.resize(kHidden, in_dim);
    fill(p.w1, in_dim);
    p.b1 = Mlp<S>::Vector::Zero(kHidden);
    p.w2.resize(kHidden, kHidden);
    fill(p.w2, kHidden);
    p.b2 = Mlp<S>::Vector::Zero(kHidden);
    p.w3.resize(kHidden, 1);
    fill(p.w3, kHidden);
    p.b3 = S(0);
    return p;
}

// Activations kept for the backward pass. ReLU masks are recovered from the
// stored post-activation values. The buffers are reused across calls when
// the same cache object is passed back in, which keeps the training loop
// free of large allocations.
template <typename S>
struct ForwardCache {
    typename Mlp<S>::Matrix h1;  // rows x hidden
    typename Mlp<S>::Matrix h2;
    typename Mlp<S>::Vector rho;  // rows, clamped to [eps, 1-eps]
    Eigen::Index rows = 0;
};

// rho = sigmoid(f_theta(input)) per row; inputs are (context, onehot(action))
// rows. Outputs are clamped away from {0, 1}.
template <typename S>
void forward(const Mlp<S>& p, const typename Mlp<S>::Matrix& inputs, ForwardCache<S>& c) {
    if (inputs.cols() != p.in_dim) throw std::invalid_argument("forward: input width != in_dim");
    c.rows = inputs.rows();
    c.h1.resize(c.rows, kHidden);
    c.h2.resize(c.rows, kHidden);
    c.rho.resize(c.rows);
    c.h1.noalias() = inputs * p.w1.transpose();
    for (int j = 0; j < kHidden; ++j) c.h1.col(j) = (c.h1.col(j).array() + p.b1(j)).max(S(0)).matrix();
    c.h2.noalias() = c.h1 * p.w2.transpose();
    for (int j = 0; j < kHidden; ++j) c.h2.col(j) = (c.h2.col(j).array() + p.b2(j)).max(S(0)).matrix();
    c.rho.noalias() = c.h2 * p.w3;
    const S lo = static_cast<S>(kRhoEps), hi = static_cast<S>(1.0 - kRhoEps);
    for (Eigen::Index i = 0; i < c.rho.size(); ++i) {
        const S z = c.rho(i) + p.b3;
        const S v = S(1) / (S(1) + std::exp(-z));
        c.rho(i) = std::min(hi, std::max(lo, v));
    }
}

template <typename S>
ForwardCache<S> forward(const Mlp<S>& p, const typename Mlp<S>::Matrix& inputs) {
    ForwardCache<S> c;
    forward(p, inputs, c);
    return c;
}

template <typename S>
struct MlpGrad {
    typename Mlp<S>::Matrix w1;
    typename Mlp<S>::Vector b1;
    typename Mlp<S>::Matrix w2;
    typename Mlp<S>::Vector b2;
    typename Mlp<S>::Vector w3;
    S b3 = S(0);

    bool all_finite() const {
        return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() && w3.allFinite() &&
               std::isfinite(static_cast<double>(b3));
    }
};

// Scratch buffers for the backward pass, reusable across steps.
template <typename S>
struct BackwardScratch {
    typename Mlp<S>::Matrix dh2;
    typename Mlp<S>::Matrix dh1;
    typename Mlp<S>::Vector dz3;
};

// Exact gradient of sum_rows L given upstream dL/drho per row, chained
// through the sigmoid derivative rho(1-rho) and both hidden layers.
template <typename S>
void backward(const Mlp<S>& p, const typename Mlp<S>::Matrix& inputs, const ForwardCache<S>& cache,
              const typename Mlp<S>::Vector& upstream, MlpGrad<S>& g, BackwardScratch<S>& ws) {
    if (inputs.rows() != cache.rows || upstream.size() != cache.rows)
        throw std::invalid_argument("backward: cache does not match inputs/upstream");

    ws.dz3.resize(cache.rows);
    ws.dz3 = (upstream.array() * cache.rho.array() * (S(1) - cache.rho.array())).matrix();

    g.w3.noalias() = cache.h2.transpose() * ws.dz3;
    g.b3 = ws.dz3.sum();

    ws.dh2.resize(cache.rows, kHidden);
    ws.dh2.noalias() = ws.dz3 * p.w3.transpose();
    ws.dh2.array() *= (cache.h2.array() > S(0)).template cast<S>();  // through ReLU

    g.w2.noalias() = ws.dh2.transpose() * cache.h1;
    g.b2 = ws.dh2.colwise().sum().transpose();

    ws.dh1.resize(cache.rows, kHidden);
    ws.dh1.noalias() = ws.dh2 * p.w2;
    ws.dh1.array() *= (cache.h1.array() > S(0)).template cast<S>();

    g.w1.noalias() = ws.dh1.transpose() * inputs;
    g.b1 = ws.dh1.colwise().sum().transpose();
}

template <typename S>
MlpGrad<S> backward(const Mlp<S>& p, const typename Mlp<S>::Matrix& inputs, const ForwardCache<S>& cache,
                    const typename Mlp<S>::Vector& upstream) {
    MlpGrad<S> g;
    BackwardScratch<S> ws;
    backward(p, inputs, cache, upstream, g, ws);
    return g;
}

// Adam with bias-corrected moments.
template <typename S>
struct AdamState {
    MlpGrad<S> m;
    MlpGrad<S> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState zero_like(const Mlp<S>& p) {
        using Matrix = typename Mlp<S>::Matrix;
        using Vector = typename Mlp<S>::Vector;
        AdamState s;
        s.m.w1 = Matrix::Zero(p.w1.rows(), p.w1.cols());
        s.m.b1 = Vector::Zero(p.b1.size());
        s.m.w2 = Matrix::Zero(p.w2.rows(), p.w2.cols());
        s.m.b2 = Vector::Zero(p.b2.size());
        s.m.w3 = Vector::Zero(p.w3.size());
        s.m.b3 = S(0);
        s.v = s.m;
        return s;
    }
};

template <typename S>
void adam_step(Mlp<S>& p, AdamState<S>& st, const MlpGrad<S>& g, double lr) {
    if (!g.all_finite()) throw std::runtime_error("adam_step: non-finite gradient");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    const S b1 = static_cast<S>(st.beta1), b2 = static_cast<S>(st.beta2);
    const S eps = static_cast<S>(st.eps);
    const S scale = static_cast<S>(lr / bc1);
    const S vs = static_cast<S>(1.0 / bc2);

    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
        m = b1 * m + (S(1) - b1) * grad;
        v = (b2 * v.array() + (S(1) - b2) * grad.array().square()).matrix();
        param.array() -= scale * m.array() / ((vs * v.array()).sqrt() + eps);
    };
    update(p.w1, st.m.w1, st.v.w1, g.w1);
    update(p.b1, st.m.b1, st.v.b1, g.b1);
    update(p.w2, st.m.w2, st.v.w2, g.w2);
    update(p.b2, st.m.b2, st.v.b2, g.b2);
    update(p.w3, st.m.w3, st.v.w3, g.w3);
    st.m.b3 = b1 * st.m.b3 + (S(1) - b1) * g.b3;
    st.v.b3 = b2 * st.v.b3 + (S(1) - b2) * g.b3 * g.b3;
    p.b3 -= scale * st.m.b3 / (std::sqrt(vs * st.v.b3) + eps);
}

// Parameter access as a flat list, used by finite-difference tests.
template <typename S, typename F>
void for_each_param(Mlp<S>& p, F&& f) {
    for (Eigen::Index i = 0; i < p.w1.size(); ++i) f(p.w1.data()[i]);
    for (Eigen::Index i = 0; i < p.b1.size(); ++i) f(p.b1.data()[i]);
    for (Eigen::Index i = 0; i < p.w2.size(); ++i) f(p.w2.data()[i]);
    for (Eigen::Index i = 0; i < p.b2.size(); ++i) f(p.b2.data()[i]);
    for (Eigen::Index i = 0; i < p.w3.size(); ++i) f(p.w3.data()[i]);
    f(p.b3);
}

template <typename S, typename F>
void for_each_grad(const MlpGrad<S>& g, F&& f) {
    for (Eigen::Index i = 0; i < g.w1.size(); ++i) f(g.w1.data()[i]);
    for (Eigen::Index i = 0; i < g.b1.size(); ++i) f(g.b1.data()[i]);
    for (Eigen::Index i = 0; i < g.w2.size(); ++i) f(g.w2.data()[i]);
    for (Eigen::Index i = 0; i < g.b2.size(); ++i) f(g.b2.data()[i]);
    for (Eigen::Index i = 0; i < g.w3.size(); ++i) f(g.w3.data()[i]);
    f(g.b3);
}

}  // namespace opesel::nn
