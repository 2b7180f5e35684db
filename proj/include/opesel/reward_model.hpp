#pragma once

#include <algorithm>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "opesel/bandit.hpp"

namespace opesel {

enum class RegressorKind { None, Logistic, BoostedStumps, Knn };

inline const char* regressor_name(RegressorKind k) {
    switch (k) {
        case RegressorKind::Logistic: return "logistic";
        case RegressorKind::BoostedStumps: return "boost";
        case RegressorKind::Knn: return "knn";
        default: return "none";
    }
}

// Fitted reward predictor q_hat(x, a). Predictions are deterministic after
// fitting and clamped to the reward range [0, 1].
class RewardModel {
public:
    virtual ~RewardModel() = default;
    virtual double predict(const Vec& x, int a) const = 0;
    virtual RegressorKind kind() const = 0;
};

using RewardModelPtr = std::shared_ptr<const RewardModel>;

class ConstantRewardModel final : public RewardModel {
public:
    ConstantRewardModel(double value, RegressorKind kind) : value_(value), kind_(kind) {}
    double predict(const Vec&, int) const override { return value_; }
    RegressorKind kind() const override { return kind_; }

private:
    double value_;
    RegressorKind kind_;
};

// ---------------------------------------------------------------------------
// L2-regularized logistic regression on features (x, onehot(a), x (x) onehot(a)),
// fitted by IRLS. Handles fractional targets in [0, 1].
class LogisticRewardModel final : public RewardModel {
public:
    static constexpr double kL2 = 1e-3;
    static constexpr int kIterations = 12;

    LogisticRewardModel(Vec weights, int dim, int n_actions)
        : w_(std::move(weights)), dim_(dim), n_actions_(n_actions) {}

    static int feature_dim(int dim, int n_actions) { return dim + n_actions + dim * n_actions + 1; }

    static void fill_features(const Vec& x, int a, int n_actions, Vec& phi) {
        const int d = static_cast<int>(x.size());
        phi.setZero();
        phi.head(d) = x;
        phi(d + a) = 1.0;
        phi.segment(d + n_actions + a * d, d) = x;
        phi(phi.size() - 1) = 1.0;  // intercept
    }

    double predict(const Vec& x, int a) const override {
        Vec phi(w_.size());
        fill_features(x, a, n_actions_, phi);
        return sigmoid(w_.dot(phi));
    }

    RegressorKind kind() const override { return RegressorKind::Logistic; }

private:
    Vec w_;
    int dim_;
    int n_actions_;
};

inline RewardModelPtr fit_logistic(const LoggedDataset& data, const std::vector<std::size_t>& idx,
                                   bool* degraded = nullptr) {
    const int d = data.dim();
    int n_act = 0;
    for (std::size_t i : idx) n_act = std::max(n_act, data.action(i) + 1);
    // Action count comes from the full dataset's range, not just this fold.
    for (std::size_t i = 0; i < data.size(); ++i) n_act = std::max(n_act, data.action(i) + 1);

    const double mean = [&] {
        double s = 0.0;
        for (std::size_t i : idx) s += data.reward(i);
        return s / static_cast<double>(idx.size());
    }();
    // Single-class fold: logistic fit is degenerate, degrade to a constant.
    if (mean <= 0.0 || mean >= 1.0) {
        if (degraded) *degraded = true;
        return std::make_shared<ConstantRewardModel>(std::clamp(mean, 0.0, 1.0), RegressorKind::Logistic);
    }

    const int p = LogisticRewardModel::feature_dim(d, n_act);
    Mat phi(idx.size(), p);
    Vec y(idx.size());
    Vec row(p);
    for (std::size_t t = 0; t < idx.size(); ++t) {
        LogisticRewardModel::fill_features(data.context(idx[t]), data.action(idx[t]), n_act, row);
        phi.row(static_cast<Eigen::Index>(t)) = row;
        y(static_cast<Eigen::Index>(t)) = data.reward(idx[t]);
    }

    Vec w = Vec::Zero(p);
    for (int it = 0; it < LogisticRewardModel::kIterations; ++it) {
        Vec eta = phi * w;
        Vec mu(eta.size()), s(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            mu(i) = sigmoid(eta(i));
            s(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-6);
        }
        Mat h = phi.transpose() * s.asDiagonal() * phi;
        h.diagonal().array() += LogisticRewardModel::kL2 * static_cast<double>(idx.size());
        Vec g = phi.transpose() * (y - mu) - LogisticRewardModel::kL2 * static_cast<double>(idx.size()) * w;
        Vec step = h.ldlt().solve(g);
        w += step;
        if (step.lpNorm<Eigen::Infinity>() < 1e-8) break;
    }
    return std::make_shared<LogisticRewardModel>(std::move(w), d, n_act);
}

// ---------------------------------------------------------------------------
// Gradient boosting with depth-2 regression trees, squared loss, optional
// sample weights. Shared by the reward regressor and the IPW policy learner.
namespace boosting {

constexpr int kRounds = 50;
constexpr double kShrinkage = 0.1;
constexpr int kMinLeaf = 8;

struct Tree {
    // Root split plus one optional split per child.
    int root_feat = -1;
    double root_thr = 0.0;
    int child_feat[2] = {-1, -1};
    double child_thr[2] = {0.0, 0.0};
    double leaf[4] = {0.0, 0.0, 0.0, 0.0};  // [left-left, left-right, right-left, right-right]

    double eval(const Vec& f) const {
        const int side = f(root_feat) <= root_thr ? 0 : 1;
        if (child_feat[side] < 0) return leaf[side * 2];
        const int sub = f(child_feat[side]) <= child_thr[side] ? 0 : 1;
        return leaf[side * 2 + sub];
    }
};

struct Ensemble {
    double base = 0.0;
    std::vector<Tree> trees;

    double eval(const Vec& f) const {
        double y = base;
        for (const Tree& t : trees) y += kShrinkage * t.eval(f);
        return y;
    }
};

struct SplitResult {
    bool found = false;
    int feat = -1;
    double thr = 0.0;
    double gain = 0.0;
};

// Best weighted-SSE-reducing axis split over the given rows; ties go to the
// lowest feature index / threshold.
inline SplitResult best_split(const Mat& feats, const Vec& resid, const Vec& wts,
                              const std::vector<int>& rows) {
    SplitResult best;
    const int n = static_cast<int>(rows.size());
    if (n < 2 * kMinLeaf) return best;
    double total = 0.0, total_w = 0.0;
    for (int r : rows) {
        total += wts(r) * resid(r);
        total_w += wts(r);
    }
    if (!(total_w > 0.0)) return best;

    std::vector<std::pair<double, int>> vals(rows.size());
    for (int f = 0; f < feats.cols(); ++f) {
        for (std::size_t t = 0; t < rows.size(); ++t) vals[t] = {feats(rows[t], f), rows[t]};
        std::sort(vals.begin(), vals.end());
        double left = 0.0, left_w = 0.0;
        for (int t = 0; t + 1 < n; ++t) {
            left += wts(vals[t].second) * resid(vals[t].second);
            left_w += wts(vals[t].second);
            if (vals[t].first == vals[t + 1].first) continue;
            const int nl = t + 1, nr = n - nl;
            if (nl < kMinLeaf || nr < kMinLeaf) continue;
            const double right = total - left, right_w = total_w - left_w;
            if (!(left_w > 0.0) || !(right_w > 0.0)) continue;
            const double gain = left * left / left_w + right * right / right_w - total * total / total_w;
            if (gain > best.gain + 1e-12) {
                best.found = true;
                best.feat = f;
                best.thr = 0.5 * (vals[t].first + vals[t + 1].first);
                best.gain = gain;
            }
        }
    }
    return best;
}

inline double weighted_mean(const Vec& v, const Vec& wts, const std::vector<int>& rows) {
    double s = 0.0, sw = 0.0;
    for (int r : rows) {
        s += wts(r) * v(r);
        sw += wts(r);
    }
    return sw > 0.0 ? s / sw : 0.0;
}

inline Ensemble fit(const Mat& feats, const Vec& y, const Vec& wts, int rounds = kRounds) {
    const int n = static_cast<int>(feats.rows());
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);

    Ensemble model;
    model.base = weighted_mean(y, wts, all);
    Vec pred = Vec::Constant(n, model.base);

    for (int round = 0; round < rounds; ++round) {
        Vec resid = y - pred;
        auto root = best_split(feats, resid, wts, all);
        if (!root.found) break;

        Tree tree;
        tree.root_feat = root.feat;
        tree.root_thr = root.thr;

        std::vector<int> side_rows[2];
        for (int r : all) side_rows[feats(r, root.feat) <= root.thr ? 0 : 1].push_back(r);

        for (int s = 0; s < 2; ++s) {
            auto sub = best_split(feats, resid, wts, side_rows[s]);
            if (sub.found) {
                tree.child_feat[s] = sub.feat;
                tree.child_thr[s] = sub.thr;
                std::vector<int> child[2];
                for (int r : side_rows[s]) child[feats(r, sub.feat) <= sub.thr ? 0 : 1].push_back(r);
                tree.leaf[s * 2] = weighted_mean(resid, wts, child[0]);
                tree.leaf[s * 2 + 1] = weighted_mean(resid, wts, child[1]);
            } else {
                tree.leaf[s * 2] = weighted_mean(resid, wts, side_rows[s]);
            }
        }

        for (int r : all) {
            const Vec f = feats.row(r);
            pred(r) += kShrinkage * tree.eval(f);
        }
        model.trees.push_back(tree);
    }
    return model;
}

}  // namespace boosting

class BoostedStumpsModel final : public RewardModel {
public:
    BoostedStumpsModel(boosting::Ensemble model, int dim, int n_actions)
        : model_(std::move(model)), dim_(dim), n_actions_(n_actions) {}

    double predict(const Vec& x, int a) const override {
        Vec f(dim_ + n_actions_);
        f.head(dim_) = x;
        f.tail(n_actions_).setZero();
        f(dim_ + a) = 1.0;
        return std::clamp(model_.eval(f), 0.0, 1.0);
    }

    RegressorKind kind() const override { return RegressorKind::BoostedStumps; }

private:
    boosting::Ensemble model_;
    int dim_;
    int n_actions_;
};

inline RewardModelPtr fit_boosted_stumps(const LoggedDataset& data, const std::vector<std::size_t>& idx) {
    const int d = data.dim();
    int n_act = 0;
    for (std::size_t i = 0; i < data.size(); ++i) n_act = std::max(n_act, data.action(i) + 1);

    const int n = static_cast<int>(idx.size());
    Mat feats(n, d + n_act);
    Vec y(n);
    for (int t = 0; t < n; ++t) {
        feats.row(t).head(d) = data.context(idx[t]);
        feats.row(t).tail(n_act).setZero();
        feats(t, d + data.action(idx[t])) = 1.0;
        y(t) = data.reward(idx[t]);
    }
    return std::make_shared<BoostedStumpsModel>(boosting::fit(feats, y, Vec::Ones(n)), d, n_act);
}

// ---------------------------------------------------------------------------
// k-nearest-neighbor mean-reward regressor: neighbors are training records
// sharing the query action, by Euclidean context distance (ties by index).
// Falls back to the global mean reward when an action has no training record.
class KnnRewardModel final : public RewardModel {
public:
    static constexpr int kNeighbors = 10;

    KnnRewardModel(Mat contexts, std::vector<std::vector<int>> rows_by_action, Vec rewards, double global_mean)
        : contexts_(std::move(contexts)),
          rows_by_action_(std::move(rows_by_action)),
          rewards_(std::move(rewards)),
          global_mean_(global_mean) {}

    double predict(const Vec& x, int a) const override {
        if (a < 0 || a >= static_cast<int>(rows_by_action_.size()) || rows_by_action_[a].empty())
            return global_mean_;
        const auto& rows = rows_by_action_[a];
        const int k = std::min<int>(kNeighbors, static_cast<int>(rows.size()));
        std::vector<std::pair<double, int>> dist;
        dist.reserve(rows.size());
        for (int r : rows) dist.emplace_back((contexts_.row(r).transpose() - x).squaredNorm(), r);
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
        std::sort(dist.begin(), dist.begin() + k);
        double s = 0.0;
        for (int t = 0; t < k; ++t) s += rewards_(dist[t].second);
        return std::clamp(s / k, 0.0, 1.0);
    }

    RegressorKind kind() const override { return RegressorKind::Knn; }

private:
    Mat contexts_;
    std::vector<std::vector<int>> rows_by_action_;
    Vec rewards_;
    double global_mean_;
};

inline RewardModelPtr fit_knn(const LoggedDataset& data, const std::vector<std::size_t>& idx) {
    int n_act = 0;
    for (std::size_t i = 0; i < data.size(); ++i) n_act = std::max(n_act, data.action(i) + 1);
    Mat contexts(idx.size(), data.dim());
    Vec rewards(idx.size());
    std::vector<std::vector<int>> by_action(n_act);
    double mean = 0.0;
    for (std::size_t t = 0; t < idx.size(); ++t) {
        contexts.row(static_cast<Eigen::Index>(t)) = data.context(idx[t]);
        rewards(static_cast<Eigen::Index>(t)) = data.reward(idx[t]);
        by_action[data.action(idx[t])].push_back(static_cast<int>(t));
        mean += data.reward(idx[t]);
    }
    mean /= static_cast<double>(idx.size());
    return std::make_shared<KnnRewardModel>(std::move(contexts), std::move(by_action), std::move(rewards), mean);
}

inline RewardModelPtr fit_reward_model(RegressorKind kind, const LoggedDataset& data,
                                       const std::vector<std::size_t>& idx, bool* degraded = nullptr) {
    if (idx.empty()) throw std::invalid_argument("fit_reward_model: empty training set");
    switch (kind) {
        case RegressorKind::Logistic: return fit_logistic(data, idx, degraded);
        case RegressorKind::BoostedStumps: return fit_boosted_stumps(data, idx);
        case RegressorKind::Knn: return fit_knn(data, idx);
        default: throw std::invalid_argument("fit_reward_model: kind carries no regressor");
    }
}

// ---------------------------------------------------------------------------
// K-fold cross-fitting: model kappa is fitted on the complement of fold
// kappa and used to predict inside fold kappa.
struct CrossFitModels {
    std::vector<int> fold_of;             // record -> fold
    std::vector<RewardModelPtr> models;   // one per fold
    RegressorKind regressor = RegressorKind::None;
    bool degraded = false;                // some fold degenerated to a constant fit

    double predict_logged(const LoggedDataset& data, std::size_t i, int a) const {
        return models[fold_of[i]]->predict(data.context(i), a);
    }

    // Out-of-sample prediction averaged over the K fold models.
    double predict_fresh(const Vec& x, int a) const {
        double s = 0.0;
        for (const auto& m : models) s += m->predict(x, a);
        return s / static_cast<double>(models.size());
    }
};

// Random K-fold partition with remainder spread over the first folds, e.g.
// n=2000, K=3 -> sizes {667, 667, 666}.
inline std::vector<int> make_folds(std::size_t n, int k, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, {0x666f6c64ULL}));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);

    std::vector<int> fold_of(n);
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (int f = 0; f < k; ++f) {
        const std::size_t sz = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
        for (std::size_t t = 0; t < sz; ++t) fold_of[order[pos++]] = f;
    }
    return fold_of;
}

inline CrossFitModels cross_fit_reward_model(const LoggedDataset& data, RegressorKind kind, int k,
                                             std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("cross_fit: K must be >= 2");
    if (data.size() < static_cast<std::size_t>(k))
        throw std::invalid_argument("cross_fit: dataset smaller than fold count");

    CrossFitModels out;
    out.regressor = kind;
    out.fold_of = make_folds(data.size(), k, seed);
    out.models.reserve(k);
    for (int f = 0; f < k; ++f) {
        std::vector<std::size_t> train;
        train.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i)
            if (out.fold_of[i] != f) train.push_back(i);
        bool degraded = false;
        out.models.push_back(fit_reward_model(kind, data, train, &degraded));
        out.degraded = out.degraded || degraded;
    }
    return out;
}

}  // namespace opesel
