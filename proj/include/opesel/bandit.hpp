#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "opesel/rng.hpp"

namespace opesel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Synthetic contextual-bandit environment. Contexts are standard normal in
// R^d; the expected reward is a per-action logistic model
//   q(x, a) = sigmoid(x . theta_a + b_a),
// with theta_a, b_a drawn once from N(0, 1)/sqrt(d) at a fixed seed, so the
// whole environment is reproducible from (dim, n_actions, seed).
class SyntheticEnvironment {
public:
    SyntheticEnvironment(int dim, int n_actions, std::uint64_t seed)
        : dim_(dim), n_actions_(n_actions), seed_(seed) {
        if (dim < 1) throw std::invalid_argument("environment: dim must be >= 1");
        if (n_actions < 2) throw std::invalid_argument("environment: need at least 2 actions");
        Rng rng(derive_seed(seed, {0x7265776172644ULL}));
        const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
        theta_.resize(n_actions, dim);
        bias_.resize(n_actions);
        for (int a = 0; a < n_actions; ++a) {
            for (int j = 0; j < dim; ++j) theta_(a, j) = rng.normal() * scale;
            bias_(a) = rng.normal() * scale;
        }
    }

    int dim() const { return dim_; }
    int n_actions() const { return n_actions_; }
    std::uint64_t seed() const { return seed_; }

    // q(x, a), strictly inside (0, 1).
    double expected_reward(const Vec& x, int a) const {
        check_action(a);
        return sigmoid(theta_.row(a).dot(x) + bias_(a));
    }

    // q(x, .) for all actions.
    Vec expected_rewards(const Vec& x) const {
        Vec z = theta_ * x + bias_;
        for (int a = 0; a < n_actions_; ++a) z(a) = sigmoid(z(a));
        return z;
    }

    void check_action(int a) const {
        if (a < 0 || a >= n_actions_) throw std::out_of_range("action index out of range");
    }

    const Mat& reward_theta() const { return theta_; }
    const Vec& reward_bias() const { return bias_; }

private:
    int dim_;
    int n_actions_;
    std::uint64_t seed_;
    Mat theta_;  // n_actions x dim
    Vec bias_;
};

// A policy is a full conditional distribution pi(a|x) over the finite action
// set, evaluable at any context.
class Policy {
public:
    virtual ~Policy() = default;
    virtual int n_actions() const = 0;

    // Probabilities over all actions at context x; sums to 1, entries > 0
    // for the policy kinds used here (softmax has full support).
    virtual Vec action_probs(const Vec& x) const = 0;

    double prob(const Vec& x, int a) const { return action_probs(x)(a); }
};

using PolicyPtr = std::shared_ptr<const Policy>;

namespace detail {
inline Vec stable_softmax(Vec z) {
    const double m = z.maxCoeff();
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = std::exp(z(i) - m);
    return z / z.sum();
}
}  // namespace detail

// pi(a|x) proportional to exp(beta * q(x, a)) on the environment's true
// expected reward. beta = 0 is uniform; large positive beta is near-optimal.
class SoftmaxQPolicy final : public Policy {
public:
    SoftmaxQPolicy(std::shared_ptr<const SyntheticEnvironment> env, double beta)
        : env_(std::move(env)), beta_(beta) {
        if (!std::isfinite(beta_)) throw std::invalid_argument("softmax_policy: beta must be finite");
    }

    int n_actions() const override { return env_->n_actions(); }
    double beta() const { return beta_; }

    Vec action_probs(const Vec& x) const override {
        return detail::stable_softmax(beta_ * env_->expected_rewards(x));
    }

private:
    std::shared_ptr<const SyntheticEnvironment> env_;
    double beta_;
};

// pi(a|x) proportional to exp(beta * score(x, a)) for an arbitrary scorer
// (learned reward model or classifier logits).
class ScoreSoftmaxPolicy final : public Policy {
public:
    using Scorer = std::function<Vec(const Vec&)>;

    ScoreSoftmaxPolicy(Scorer scorer, int n_actions, double beta)
        : scorer_(std::move(scorer)), n_actions_(n_actions), beta_(beta) {}

    int n_actions() const override { return n_actions_; }

    Vec action_probs(const Vec& x) const override {
        return detail::stable_softmax(beta_ * scorer_(x));
    }

private:
    Scorer scorer_;
    int n_actions_;
    double beta_;
};

// Mixture of data collection policies with meta assignment weights p(j).
class MixturePolicy final : public Policy {
public:
    MixturePolicy(std::vector<PolicyPtr> components, std::vector<double> weights)
        : components_(std::move(components)), weights_(std::move(weights)) {
        if (components_.empty() || components_.size() != weights_.size())
            throw std::invalid_argument("mixture: components/weights size mismatch");
        double sum = 0.0;
        for (double w : weights_) {
            if (w < 0.0) throw std::invalid_argument("mixture: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("mixture: weights must sum to 1");
    }

    int n_actions() const override { return components_[0]->n_actions(); }
    std::size_t n_components() const { return components_.size(); }
    const PolicyPtr& component(std::size_t j) const { return components_[j]; }
    double weight(std::size_t j) const { return weights_[j]; }

    Vec action_probs(const Vec& x) const override {
        Vec p = Vec::Zero(n_actions());
        for (std::size_t j = 0; j < components_.size(); ++j)
            p += weights_[j] * components_[j]->action_probs(x);
        return p;
    }

private:
    std::vector<PolicyPtr> components_;
    std::vector<double> weights_;
};

// Immutable logged bandit data: (context, action, reward, mixture behavior
// propensity, realized data-collection policy index) per record.
class LoggedDataset {
public:
    LoggedDataset(Mat contexts, std::vector<int> actions, Vec rewards, Vec propensities,
                  std::vector<int> policy_indices)
        : contexts_(std::move(contexts)),
          actions_(std::move(actions)),
          rewards_(std::move(rewards)),
          propensities_(std::move(propensities)),
          policy_indices_(std::move(policy_indices)) {
        const auto n = static_cast<std::size_t>(contexts_.rows());
        if (actions_.size() != n || static_cast<std::size_t>(rewards_.size()) != n ||
            static_cast<std::size_t>(propensities_.size()) != n || policy_indices_.size() != n)
            throw std::invalid_argument("dataset: field lengths disagree");
        for (Eigen::Index i = 0; i < propensities_.size(); ++i)
            if (!(propensities_(i) > 0.0))
                throw std::invalid_argument("dataset: propensity must be positive (full support)");
    }

    std::size_t size() const { return actions_.size(); }
    int dim() const { return static_cast<int>(contexts_.cols()); }

    const Mat& contexts() const { return contexts_; }
    Vec context(std::size_t i) const { return contexts_.row(static_cast<Eigen::Index>(i)); }
    int action(std::size_t i) const { return actions_[i]; }
    double reward(std::size_t i) const { return rewards_(static_cast<Eigen::Index>(i)); }
    double propensity(std::size_t i) const { return propensities_(static_cast<Eigen::Index>(i)); }
    int policy_index(std::size_t i) const { return policy_indices_[i]; }
    const Vec& rewards() const { return rewards_; }
    const Vec& propensities() const { return propensities_; }
    const std::vector<int>& actions() const { return actions_; }
    const std::vector<int>& policy_indices() const { return policy_indices_; }

    double mean_reward() const {
        if (size() == 0) throw std::invalid_argument("mean_reward: empty dataset");
        return rewards_.mean();
    }

    // New dataset from a row selection (bootstrap or partition).
    LoggedDataset gather(const std::vector<std::size_t>& idx) const {
        Mat c(idx.size(), contexts_.cols());
        std::vector<int> a(idx.size());
        Vec r(idx.size()), p(idx.size());
        std::vector<int> j(idx.size());
        for (std::size_t t = 0; t < idx.size(); ++t) {
            c.row(static_cast<Eigen::Index>(t)) = contexts_.row(static_cast<Eigen::Index>(idx[t]));
            a[t] = actions_[idx[t]];
            r(static_cast<Eigen::Index>(t)) = rewards_(static_cast<Eigen::Index>(idx[t]));
            p(static_cast<Eigen::Index>(t)) = propensities_(static_cast<Eigen::Index>(idx[t]));
            j[t] = policy_indices_[idx[t]];
        }
        return LoggedDataset(std::move(c), std::move(a), std::move(r), std::move(p), std::move(j));
    }

    // Same records with replaced propensities (pseudo behavior relabeling).
    LoggedDataset with_propensities(Vec p) const {
        return LoggedDataset(contexts_, actions_, rewards_, std::move(p), policy_indices_);
    }

private:
    Mat contexts_;  // n x d
    std::vector<int> actions_;
    Vec rewards_;
    Vec propensities_;
    std::vector<int> policy_indices_;
};

// n i.i.d. standard normal contexts, one per row.
inline Mat sample_contexts(const SyntheticEnvironment& env, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("sample_contexts: n must be >= 1");
    Rng rng(derive_seed(seed, {0x636f6e74657874ULL}));
    Mat x(n, env.dim());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
    return x;
}

inline PolicyPtr softmax_policy(std::shared_ptr<const SyntheticEnvironment> env, double beta) {
    return std::make_shared<SoftmaxQPolicy>(std::move(env), beta);
}

// Draw logged data under a mixture behavior policy: per record sample
// x ~ p(x), j ~ p(j), a ~ pi_j(.|x), r ~ Bern(q(x, a)). The stored
// propensity is the mixture propensity pi_b(a|x) = sum_j p(j) pi_j(a|x).
inline LoggedDataset sample_logged_data(const SyntheticEnvironment& env, const MixturePolicy& behavior,
                                        std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("sample_logged_data: n must be >= 1");
    Rng rng(derive_seed(seed, {0x6c6f67ULL}));
    const int n_act = behavior.n_actions();
    const std::size_t l = behavior.n_components();

    std::vector<double> meta_cdf(l);
    double acc = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
        acc += behavior.weight(j);
        meta_cdf[j] = acc;
    }

    Mat contexts(n, env.dim());
    std::vector<int> actions(n);
    Vec rewards(n), propens(n);
    std::vector<int> pol_idx(n);

    Vec x(env.dim());
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < env.dim(); ++d) x(d) = rng.normal();
        const auto j = rng.categorical_from_cdf(meta_cdf.data(), l);
        const Vec pj = behavior.component(j)->action_probs(x);
        double u = rng.uniform(), c = 0.0;
        int a = n_act - 1;
        for (int k = 0; k < n_act; ++k) {
            c += pj(k);
            if (u < c) { a = k; break; }
        }
        const double r = rng.bernoulli(env.expected_reward(x, a)) ? 1.0 : 0.0;

        contexts.row(static_cast<Eigen::Index>(i)) = x;
        actions[i] = a;
        rewards(static_cast<Eigen::Index>(i)) = r;
        propens(static_cast<Eigen::Index>(i)) = behavior.prob(x, a);
        pol_idx[i] = static_cast<int>(j);
    }
    return LoggedDataset(std::move(contexts), std::move(actions), std::move(rewards), std::move(propens),
                         std::move(pol_idx));
}

// Monte-Carlo policy value over fresh contexts with the exact inner
// expectation over actions (no reward sampling noise):
//   V(pi) ~= mean_i sum_a pi(a|x_i) q(x_i, a).
inline double true_policy_value(const SyntheticEnvironment& env, const Policy& pi, std::size_t n_mc,
                                std::uint64_t seed) {
    if (n_mc == 0) throw std::invalid_argument("true_policy_value: n_mc must be >= 1");
    Rng rng(derive_seed(seed, {0x76616c7565ULL}));
    Vec x(env.dim());
    double total = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        for (int d = 0; d < env.dim(); ++d) x(d) = rng.normal();
        total += pi.action_probs(x).dot(env.expected_rewards(x));
    }
    return total / static_cast<double>(n_mc);
}

// w(x, a) = pi_e(a|x) / pi_b(a|x) for a single logged record.
inline double importance_ratio(const Policy& pi_e, const Vec& x, int a, double propensity) {
    if (!(propensity > 0.0)) throw std::domain_error("importance_ratio: zero propensity (full support violated)");
    return pi_e.prob(x, a) / propensity;
}

inline Vec importance_ratios(const Policy& pi_e, const LoggedDataset& data) {
    Vec w(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        w(static_cast<Eigen::Index>(i)) =
            importance_ratio(pi_e, data.context(i), data.action(i), data.propensity(i));
    return w;
}

}  // namespace opesel
