#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include "opesel/bandit.hpp"
#include "opesel/estimators.hpp"
#include "opesel/reward_model.hpp"
#include "opesel/slope.hpp"

namespace opesel {

// Per-dataset evaluation state shared across candidates: cross-fitted
// reward models and their prediction matrices, built once per regressor
// kind on first use.
class DatasetEval {
public:
    DatasetEval(const LoggedDataset& data, int k_folds, std::uint64_t seed)
        : data_(data), k_folds_(k_folds), seed_(seed) {}

    const LoggedDataset& data() const { return data_; }

    const CrossFitModels& models(RegressorKind kind) {
        auto it = models_.find(kind);
        if (it == models_.end())
            it = models_.emplace(kind, cross_fit_reward_model(data_, kind, k_folds_, seed_)).first;
        return it->second;
    }

    // Cross-fitted q_hat(x_i, a) for every record and action.
    const Mat& qhat(RegressorKind kind) {
        auto it = qhat_.find(kind);
        if (it == qhat_.end()) {
            const auto& m = models(kind);
            int n_act = 0;
            for (std::size_t i = 0; i < data_.size(); ++i) n_act = std::max(n_act, data_.action(i) + 1);
            n_act = std::max(n_act, declared_actions_);
            Mat q(data_.size(), n_act);
            for (std::size_t i = 0; i < data_.size(); ++i)
                for (int a = 0; a < n_act; ++a) q(static_cast<Eigen::Index>(i), a) = m.predict_logged(data_, i, a);
            it = qhat_.emplace(kind, std::move(q)).first;
        }
        return it->second;
    }

    // Action-space width when it exceeds the actions observed in the data.
    void declare_actions(int n_act) { declared_actions_ = n_act; }

private:
    const LoggedDataset& data_;
    int k_folds_;
    std::uint64_t seed_;
    int declared_actions_ = 0;
    std::map<RegressorKind, CrossFitModels> models_;
    std::map<RegressorKind, Mat> qhat_;
};

// Per-(dataset, evaluation policy) cache: policy probabilities at logged
// contexts and the importance ratios.
struct PolicyCache {
    Mat pi_probs;  // n x |A|
    Vec w;         // pi_e(a_i|x_i) / propensity_i
};

inline PolicyCache make_policy_cache(const LoggedDataset& data, const Policy& pi_e) {
    PolicyCache c;
    c.pi_probs.resize(data.size(), pi_e.n_actions());
    c.w.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec p = pi_e.action_probs(data.context(i));
        c.pi_probs.row(static_cast<Eigen::Index>(i)) = p;
        c.w(static_cast<Eigen::Index>(i)) = p(data.action(i)) / data.propensity(i);
    }
    return c;
}

namespace detail {

// Per-record contributions whose mean is the estimate. DR-type families use
// the full per-record summand (shifted residual plus model term); that same
// vector feeds the confidence widths used by SLOPE.
inline std::vector<double> candidate_contributions(const EstimatorCandidate& cand, DatasetEval& de,
                                                   const PolicyCache& pc, double lambda) {
    const auto& data = de.data();
    const std::size_t n = data.size();
    std::vector<double> c(n);

    const bool dr_type = family_is_dr_type(cand.family);
    const bool dm_only = cand.family == Family::DM;
    const Mat* q = nullptr;
    Vec dm_term;
    if (dr_type || dm_only) {
        q = &de.qhat(cand.regressor);
        dm_term = (pc.pi_probs.array() * q->array()).rowwise().sum().matrix();
    }
    if (dm_only) {
        for (std::size_t i = 0; i < n; ++i) c[i] = dm_term(static_cast<Eigen::Index>(i));
        return c;
    }

    WeightTransform t = transform_for(cand.family, lambda);
    double mean_w = 1.0;
    if (t.kind == TransformKind::SelfNormalize) {
        mean_w = pc.w.mean();
        if (mean_w == 0.0) throw std::domain_error("self-normalization: all importance weights are zero");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Index ei = static_cast<Eigen::Index>(i);
        const double tw = t.apply(pc.w(ei), mean_w);
        if (dr_type) {
            const double qi = (*q)(ei, data.action(i));
            c[i] = tw * (data.reward(i) - qi) + dm_term(ei);
        } else {
            c[i] = tw * data.reward(i);
        }
    }
    return c;
}

}  // namespace detail

// Evaluate a candidate on a dataset: fit its reward model by cross-fitting,
// tune its hyperparameter with SLOPE over the candidate's ordered grid, and
// return the tuned estimate.
inline double evaluate_candidate(const EstimatorCandidate& cand, DatasetEval& de, const PolicyCache& pc,
                                 double* chosen_lambda = nullptr, double cnf_delta = 0.05) {
    if (cand.grid.empty()) {
        const auto c = detail::candidate_contributions(cand, de, pc, kInf);
        double mean = 0.0;
        for (double v : c) mean += v;
        if (chosen_lambda) *chosen_lambda = kInf;
        return mean / static_cast<double>(c.size());
    }

    TuningProblem prob;
    prob.lambdas = cand.grid;
    prob.estimates.reserve(cand.grid.size());
    prob.widths.reserve(cand.grid.size());
    for (double lambda : cand.grid) {
        const auto c = detail::candidate_contributions(cand, de, pc, lambda);
        double mean = 0.0;
        for (double v : c) mean += v;
        prob.estimates.push_back(mean / static_cast<double>(c.size()));
        prob.widths.push_back(cnf_width(c, cnf_delta));
    }
    // The subgaussian shrinkage family can bump its empirical width back up
    // near lambda = 1, where the weights collapse to 1 and the contributions
    // regain the full reward variance. A running minimum restores the
    // non-increasing widths the selection walk assumes.
    for (std::size_t i = 1; i < prob.widths.size(); ++i)
        prob.widths[i] = std::min(prob.widths[i], prob.widths[i - 1]);
    const std::size_t m = slope_select(prob);
    if (chosen_lambda) *chosen_lambda = prob.lambdas[m];
    return prob.estimates[m];
}

// Convenience wrapper building the caches from scratch.
inline double evaluate_candidate(const EstimatorCandidate& cand, const Policy& pi_e,
                                 const LoggedDataset& data, int k_folds, std::uint64_t cross_fit_seed,
                                 double* chosen_lambda = nullptr) {
    DatasetEval de(data, k_folds, cross_fit_seed);
    de.declare_actions(pi_e.n_actions());
    const PolicyCache pc = make_policy_cache(data, pi_e);
    return evaluate_candidate(cand, de, pc, chosen_lambda);
}

}  // namespace opesel
