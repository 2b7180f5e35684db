#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "opesel/bandit.hpp"
#include "opesel/baseline.hpp"
#include "opesel/estimators.hpp"
#include "opesel/evaluate.hpp"
#include "opesel/pasif.hpp"

namespace opesel {

// ---------------------------------------------------------------------------
// Selection and metrics.

// argmin over estimated MSEs; ties resolve to the lowest index.
inline std::size_t select_estimator(const Vec& estimated_mses) {
    if (estimated_mses.size() == 0) throw std::invalid_argument("select_estimator: empty candidate list");
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < estimated_mses.size(); ++i)
        if (estimated_mses(i) < estimated_mses(best)) best = static_cast<std::size_t>(i);
    return best;
}

// rRegret(e) = (MSE(selected) - MSE(best)) / MSE(best).
inline double relative_regret_e(const Vec& true_mses, std::size_t m_hat) {
    if (m_hat >= static_cast<std::size_t>(true_mses.size()))
        throw std::out_of_range("relative_regret_e: selected index out of range");
    const double best = true_mses.minCoeff();
    if (!(best > 0.0)) throw std::domain_error("relative_regret_e: best MSE is zero");
    return (true_mses(static_cast<Eigen::Index>(m_hat)) - best) / best;
}

// Fractional (average) ranks, ties averaged.
inline Vec average_ranks(const Vec& v) {
    const Eigen::Index n = v.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
    Vec ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index t = i; t <= j; ++t) ranks(order[t]) = r;
        i = j + 1;
    }
    return ranks;
}

// Spearman rank correlation: Pearson correlation of the rank vectors.
inline double spearman_rank_correlation(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("spearman: need at least 2 values");
    const Vec ra = average_ranks(a), rb = average_ranks(b);
    const double ma = ra.mean(), mb = rb.mean();
    const Vec da = ra.array() - ma, db = rb.array() - mb;
    const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
    if (denom == 0.0) throw std::domain_error("spearman: correlation undefined for a constant vector");
    return da.dot(db) / denom;
}

// ---------------------------------------------------------------------------
// Estimated-MSE vectors for a whole candidate set under either method.

template <typename S>
Vec pasif_mse_all(const std::vector<EstimatorCandidate>& cands, const LoggedDataset& data,
                  const Policy& pi_e, PolicyPtr pi_b, const PasifConfig& cfg, int k_folds) {
    auto from_splits = [&](const std::vector<PasifSplit<S>>& splits, const EstimatorCandidate& cand) {
        double total = 0.0;
        for (std::size_t si = 0; si < splits.size(); ++si) {
            const auto& sp = splits[si];
            DatasetEval de(sp.d_beh, k_folds, derive_seed(cfg.train_seed, {0x78666974ULL, si}));
            de.declare_actions(pi_b->n_actions());
            const PolicyCache pc = make_policy_cache(sp.d_beh, *sp.pseudo_eval);
            const double gap = evaluate_candidate(cand, de, pc) - sp.v_on;
            total += gap * gap;
        }
        return total / static_cast<double>(splits.size());
    };

    Vec out(cands.size());
    if (cfg.strict_alg1) {
        // Literal Algorithm 1 nesting: retrain inside every candidate loop.
        // The seeds do not depend on the candidate, so this reproduces the
        // shared-rule result exactly, at M times the cost.
        for (std::size_t m = 0; m < cands.size(); ++m) {
            const auto splits = pasif_prepare<S>(data, pi_e, pi_b, cfg);
            out(static_cast<Eigen::Index>(m)) = from_splits(splits, cands[m]);
        }
        return out;
    }

    const auto splits = pasif_prepare<S>(data, pi_e, pi_b, cfg);
    // Share the per-split evaluation caches across candidates.
    std::vector<std::unique_ptr<DatasetEval>> evals;
    std::vector<PolicyCache> caches;
    for (std::size_t si = 0; si < splits.size(); ++si) {
        evals.push_back(std::make_unique<DatasetEval>(splits[si].d_beh, k_folds,
                                                      derive_seed(cfg.train_seed, {0x78666974ULL, si})));
        evals.back()->declare_actions(pi_b->n_actions());
        caches.push_back(make_policy_cache(splits[si].d_beh, *splits[si].pseudo_eval));
    }
    for (std::size_t m = 0; m < cands.size(); ++m) {
        double total = 0.0;
        for (std::size_t si = 0; si < splits.size(); ++si) {
            const double gap = evaluate_candidate(cands[m], *evals[si], caches[si]) - splits[si].v_on;
            total += gap * gap;
        }
        out(static_cast<Eigen::Index>(m)) = total / static_cast<double>(splits.size());
    }
    return out;
}

inline Vec heuristic_mse_all(const std::vector<EstimatorCandidate>& cands, const LoggedDataset& data,
                             const MixturePolicy& behavior, const HeuristicConfig& cfg, int k_folds) {
    const auto splits = heuristic_prepare(data, behavior, cfg);
    std::vector<std::unique_ptr<DatasetEval>> evals;
    std::vector<PolicyCache> caches;
    for (std::size_t si = 0; si < splits.size(); ++si) {
        evals.push_back(std::make_unique<DatasetEval>(splits[si].d_rest, k_folds,
                                                      derive_seed(cfg.seed, {0x78666968ULL, si})));
        evals.back()->declare_actions(behavior.n_actions());
        caches.push_back(make_policy_cache(splits[si].d_rest, *splits[si].pseudo_eval));
    }
    Vec out(cands.size());
    for (std::size_t m = 0; m < cands.size(); ++m) {
        double total = 0.0;
        for (std::size_t si = 0; si < splits.size(); ++si) {
            const double gap = evaluate_candidate(cands[m], *evals[si], caches[si]) - splits[si].v_on;
            total += gap * gap;
        }
        out(static_cast<Eigen::Index>(m)) = total / static_cast<double>(splits.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ground-truth MSE oracle: fresh test logged datasets shared across
// candidates and evaluation policies.
class GroundTruthOracle {
public:
    GroundTruthOracle(std::shared_ptr<const SyntheticEnvironment> env,
                      std::shared_ptr<const MixturePolicy> behavior, std::size_t n, int n_reps, int k_folds,
                      std::uint64_t seed)
        : env_(std::move(env)), behavior_(std::move(behavior)), n_(n), k_folds_(k_folds), seed_(seed) {
        if (n_reps < 1) throw std::invalid_argument("oracle: n_reps must be >= 1");
        test_sets_.reserve(n_reps);
        for (int r = 0; r < n_reps; ++r)
            test_sets_.push_back(sample_logged_data(*env_, *behavior_, n_,
                                                    derive_seed(seed_, {0x6f7261636cULL, static_cast<std::uint64_t>(r)})));
        for (int r = 0; r < n_reps; ++r) {
            evals_.push_back(std::make_unique<DatasetEval>(test_sets_[r], k_folds_,
                                                           derive_seed(seed_, {0x6f786669ULL, static_cast<std::uint64_t>(r)})));
            evals_.back()->declare_actions(env_->n_actions());
        }
    }

    double true_value(const Policy& pi_e, std::size_t n_mc) const {
        return true_policy_value(*env_, pi_e, n_mc, derive_seed(seed_, {0x76747275ULL}));
    }

    // True MSE of every candidate for pi_e: mean over test datasets of the
    // squared gap to the given true value.
    Vec mse_table(const std::vector<EstimatorCandidate>& cands, const Policy& pi_e, double v_true) {
        Vec acc = Vec::Zero(cands.size());
        for (std::size_t r = 0; r < test_sets_.size(); ++r) {
            const PolicyCache pc = make_policy_cache(test_sets_[r], pi_e);
            for (std::size_t m = 0; m < cands.size(); ++m) {
                const double est = evaluate_candidate(cands[m], *evals_[r], pc);
                const double gap = est - v_true;
                acc(static_cast<Eigen::Index>(m)) += gap * gap;
            }
        }
        return acc / static_cast<double>(test_sets_.size());
    }

    // Same protocol for an arbitrary estimator routine.
    template <typename Estimator>
    double mse_of(Estimator&& estimate, const Policy& pi_e, double v_true) {
        double acc = 0.0;
        for (std::size_t r = 0; r < test_sets_.size(); ++r) {
            const double gap = estimate(pi_e, test_sets_[r]) - v_true;
            acc += gap * gap;
        }
        return acc / static_cast<double>(test_sets_.size());
    }

private:
    std::shared_ptr<const SyntheticEnvironment> env_;
    std::shared_ptr<const MixturePolicy> behavior_;
    std::size_t n_;
    int k_folds_;
    std::uint64_t seed_;
    std::vector<LoggedDataset> test_sets_;
    std::vector<std::unique_ptr<DatasetEval>> evals_;
};

// Single-candidate convenience form.
inline double ground_truth_mse(const EstimatorCandidate& cand, const Policy& pi_e,
                               std::shared_ptr<const SyntheticEnvironment> env,
                               std::shared_ptr<const MixturePolicy> behavior, std::size_t n, int n_reps,
                               std::size_t n_mc, int k_folds, std::uint64_t seed) {
    GroundTruthOracle oracle(std::move(env), std::move(behavior), n, n_reps, k_folds, seed);
    const double v = oracle.true_value(pi_e, n_mc);
    return oracle.mse_table({cand}, pi_e, v)(0);
}

// ---------------------------------------------------------------------------
// Candidate policies for the policy selection task: {QLearner, IPWLearner}
// x {logistic, boosted-stumps base model} x inverse temperatures
// {1, 2, 10, 20, 100}, each a softmax over the learned per-action scores.
struct OpsCandidate {
    PolicyPtr policy;
    std::string name;
    bool degenerate = false;  // learner fell back to uniform scores
};

namespace detail {

// Weighted multinomial logistic classifier on raw contexts: per-record
// weight r_i / propensity_i, target class a_i. Trained with Adam.
inline Mat fit_ipw_logistic(const LoggedDataset& data, int n_actions, bool* degenerate) {
    const int d = data.dim();
    const std::size_t n = data.size();
    Vec wts(n);
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wts(static_cast<Eigen::Index>(i)) = data.reward(i) / data.propensity(i);
        wsum += wts(static_cast<Eigen::Index>(i));
    }
    if (!(wsum > 0.0)) {
        if (degenerate) *degenerate = true;
        return Mat::Zero(n_actions, d + 1);
    }
    wts /= wsum / static_cast<double>(n);  // normalize to mean 1

    Mat w = Mat::Zero(n_actions, d + 1);
    Mat m = w, v = w;
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, l2 = 1e-4;
    Mat phi(n, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
        phi.row(static_cast<Eigen::Index>(i)).head(d) = data.context(i);
        phi(static_cast<Eigen::Index>(i), d) = 1.0;
    }
    for (int it = 1; it <= 400; ++it) {
        Mat logits = phi * w.transpose();  // n x A
        Mat grad = Mat::Zero(n_actions, d + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::Index ei = static_cast<Eigen::Index>(i);
            Vec z = logits.row(ei).transpose();
            const double mx = z.maxCoeff();
            Vec p = (z.array() - mx).exp().matrix();
            p /= p.sum();
            p(data.action(i)) -= 1.0;
            grad += (wts(ei) / static_cast<double>(n)) * p * phi.row(ei);
        }
        grad += 2.0 * l2 * w;
        m = b1 * m + (1.0 - b1) * grad;
        v = (b2 * v.array() + (1.0 - b2) * grad.array().square()).matrix();
        const double bc1 = 1.0 - std::pow(b1, it), bc2 = 1.0 - std::pow(b2, it);
        w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    }
    return w;
}

}  // namespace detail

inline std::vector<OpsCandidate> build_ops_candidates(const LoggedDataset& data, int n_actions, int k_folds,
                                                      std::uint64_t seed) {
    if (data.size() == 0) throw std::invalid_argument("build_ops_candidates: empty dataset");
    const std::vector<double> betas = {1.0, 2.0, 10.0, 20.0, 100.0};
    const int d = data.dim();
    std::vector<OpsCandidate> out;
    out.reserve(2 * 2 * betas.size());

    // QLearner scorers: cross-fitted reward models, fresh contexts scored by
    // the average over fold models.
    for (RegressorKind kind : {RegressorKind::Logistic, RegressorKind::BoostedStumps}) {
        auto models = std::make_shared<CrossFitModels>(cross_fit_reward_model(
            data, kind, k_folds, derive_seed(seed, {0x716c726eULL, static_cast<std::uint64_t>(kind)})));
        auto scorer = [models, n_actions](const Vec& x) {
            Vec s(n_actions);
            for (int a = 0; a < n_actions; ++a) s(a) = models->predict_fresh(x, a);
            return s;
        };
        for (double beta : betas) {
            out.push_back({std::make_shared<ScoreSoftmaxPolicy>(scorer, n_actions, beta),
                           std::string("qlearner-") + regressor_name(kind) + "-b" + std::to_string((int)beta),
                           false});
        }
    }

    // IPWLearner, logistic base: weighted multinomial logistic logits.
    {
        bool degenerate = false;
        auto w = std::make_shared<Mat>(detail::fit_ipw_logistic(data, n_actions, &degenerate));
        auto scorer = [w, d](const Vec& x) {
            Vec phi(d + 1);
            phi.head(d) = x;
            phi(d) = 1.0;
            return Vec(*w * phi);
        };
        for (double beta : betas)
            out.push_back({std::make_shared<ScoreSoftmaxPolicy>(scorer, n_actions, beta),
                           "ipwlearner-logistic-b" + std::to_string((int)beta), degenerate});
    }

    // IPWLearner, boosted base: one-vs-all weighted regression of the action
    // indicator, same per-record weights.
    {
        const std::size_t n = data.size();
        Vec wts(n);
        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            wts(static_cast<Eigen::Index>(i)) = data.reward(i) / data.propensity(i);
            wsum += wts(static_cast<Eigen::Index>(i));
        }
        bool degenerate = !(wsum > 0.0);
        auto ensembles = std::make_shared<std::vector<boosting::Ensemble>>();
        if (!degenerate) {
            Mat feats(n, d);
            for (std::size_t i = 0; i < n; ++i) feats.row(static_cast<Eigen::Index>(i)) = data.context(i);
            for (int a = 0; a < n_actions; ++a) {
                Vec y(n);
                for (std::size_t i = 0; i < n; ++i)
                    y(static_cast<Eigen::Index>(i)) = data.action(i) == a ? 1.0 : 0.0;
                ensembles->push_back(boosting::fit(feats, y, wts));
            }
        }
        auto scorer = [ensembles, n_actions, degenerate](const Vec& x) {
            if (degenerate) return Vec(Vec::Zero(n_actions));
            Vec s(n_actions);
            for (int a = 0; a < n_actions; ++a) s(a) = (*ensembles)[a].eval(x);
            return s;
        };
        for (double beta : betas)
            out.push_back({std::make_shared<ScoreSoftmaxPolicy>(scorer, n_actions, beta),
                           "ipwlearner-boost-b" + std::to_string((int)beta), degenerate});
    }
    return out;
}

// ---------------------------------------------------------------------------
// OPS: per candidate policy, select an estimator with the configured method,
// then estimate that policy's value with the selected estimator; the policy
// with the highest estimated value wins.
struct OpsSelection {
    std::size_t chosen = 0;
    Vec est_values;                  // per policy, under its own selected estimator
    std::vector<std::size_t> m_hat;  // per policy
};

// mse_all: callable Policy -> Vec of estimated MSEs over `cands`.
template <typename MseAll>
OpsSelection ops_select(const std::vector<OpsCandidate>& policies, const std::vector<EstimatorCandidate>& cands,
                        DatasetEval& de, MseAll&& mse_all) {
    if (policies.size() < 2) throw std::invalid_argument("ops_select: need at least 2 candidate policies");
    OpsSelection out;
    out.est_values.resize(policies.size());
    out.m_hat.resize(policies.size());
    for (std::size_t p = 0; p < policies.size(); ++p) {
        const Vec mses = mse_all(*policies[p].policy);
        out.m_hat[p] = select_estimator(mses);
        const PolicyCache pc = make_policy_cache(de.data(), *policies[p].policy);
        out.est_values(static_cast<Eigen::Index>(p)) = evaluate_candidate(cands[out.m_hat[p]], de, pc);
    }
    out.chosen = 0;
    for (std::size_t p = 1; p < policies.size(); ++p)
        if (out.est_values(static_cast<Eigen::Index>(p)) > out.est_values(static_cast<Eigen::Index>(out.chosen)))
            out.chosen = p;
    return out;
}

// rRegret(p) = (V(best) - V(chosen)) / V(best).
inline double relative_regret_p(const Vec& true_values, std::size_t chosen) {
    const double best = true_values.maxCoeff();
    if (!(best > 0.0)) throw std::domain_error("relative_regret_p: best value is not positive");
    return (best - true_values(static_cast<Eigen::Index>(chosen))) / best;
}

// ---------------------------------------------------------------------------
// End-to-end OPE: split the data, select an estimator on the pre-split with
// PAS-IF, evaluate it on the post-split, average over splits.
template <typename S>
double end_to_end_ope(const std::vector<EstimatorCandidate>& cands, const Policy& pi_e, PolicyPtr pi_b,
                      const LoggedDataset& data, const std::vector<std::uint64_t>& split_seeds,
                      const PasifConfig& cfg, int k_folds) {
    if (data.size() < 4) throw std::invalid_argument("end_to_end_ope: dataset too small to split");
    if (split_seeds.empty()) throw std::invalid_argument("end_to_end_ope: empty split seed set");

    double total = 0.0;
    for (std::uint64_t s1 : split_seeds) {
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(s1, {0x65326532ULL}));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
        const std::size_t half = data.size() / 2;
        const std::vector<std::size_t> pre_idx(order.begin(), order.begin() + half);
        const std::vector<std::size_t> post_idx(order.begin() + half, order.end());
        const LoggedDataset pre = data.gather(pre_idx);
        const LoggedDataset post = data.gather(post_idx);

        PasifConfig sel_cfg = cfg;
        sel_cfg.train_seed = derive_seed(cfg.train_seed, {0x65326553ULL, s1});
        const Vec mses = pasif_mse_all<S>(cands, pre, pi_e, pi_b, sel_cfg, k_folds);
        const std::size_t m_hat = select_estimator(mses);

        total += evaluate_candidate(cands[m_hat], pi_e, post, k_folds, derive_seed(s1, {0x65326578ULL}));
    }
    return total / static_cast<double>(split_seeds.size());
}

}  // namespace opesel
