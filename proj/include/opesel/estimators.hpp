#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "opesel/bandit.hpp"
#include "opesel/reward_model.hpp"

namespace opesel {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Importance-weight transforms behind the estimator families of the
// candidate table. lambda is the built-in hyperparameter; self-normalize
// needs the dataset mean weight and is handled at the estimator level.
enum class TransformKind { Identity, Clip, SelfNormalize, Switch, OptimisticShrinkage, LambdaSubgaussian };

struct WeightTransform {
    TransformKind kind = TransformKind::Identity;
    double lambda = kInf;
    double exponent = -1.0;  // lambda-subgaussian only

    double apply(double w, double mean_w = 1.0) const {
        switch (kind) {
            case TransformKind::Identity:
                return w;
            case TransformKind::Clip:
                return std::min(w, lambda);
            case TransformKind::SelfNormalize:
                return w / mean_w;
            case TransformKind::Switch:
                return w <= lambda ? w : 0.0;  // ties count as "not large"
            case TransformKind::OptimisticShrinkage:
                if (std::isinf(lambda)) return w;
                if (lambda == 0.0) return 0.0;
                return lambda * w / (w * w + lambda);
            case TransformKind::LambdaSubgaussian:
                if (lambda == 1.0) return 1.0;
                if (exponent == -1.0) return w / ((1.0 - lambda) + lambda * w);
                return std::pow((1.0 - lambda) * std::pow(w, exponent) + lambda, 1.0 / exponent);
        }
        return w;
    }
};

inline WeightTransform identity_transform() { return {}; }
inline WeightTransform clip_transform(double lambda) { return {TransformKind::Clip, lambda}; }
inline WeightTransform self_normalize_transform() { return {TransformKind::SelfNormalize}; }
inline WeightTransform switch_transform(double lambda) { return {TransformKind::Switch, lambda}; }
inline WeightTransform dros_transform(double lambda) { return {TransformKind::OptimisticShrinkage, lambda}; }
inline WeightTransform lambda_sub_transform(double lambda) { return {TransformKind::LambdaSubgaussian, lambda}; }

// ---------------------------------------------------------------------------
// Direct method: (1/n) sum_i sum_a pi_e(a|x_i) qhat_{fold(i)}(x_i, a).
inline double estimate_dm(const Policy& pi_e, const LoggedDataset& data, const CrossFitModels& models) {
    const int n_act = pi_e.n_actions();
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec p = pi_e.action_probs(data.context(i));
        double v = 0.0;
        for (int a = 0; a < n_act; ++a) v += p(a) * models.predict_logged(data, i, a);
        total += v;
    }
    return total / static_cast<double>(data.size());
}

// IPS family: (1/n) sum_i T(w_i) r_i. Covers IPS, IPSps, SNIPS and
// IPS-lambda through the transform choice.
inline double estimate_ips(const Policy& pi_e, const LoggedDataset& data, const WeightTransform& t) {
    const Vec w = importance_ratios(pi_e, data);
    double mean_w = 1.0;
    if (t.kind == TransformKind::SelfNormalize) {
        mean_w = w.mean();
        if (mean_w == 0.0) throw std::domain_error("estimate_ips: all weights zero under self-normalization");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        total += t.apply(w(static_cast<Eigen::Index>(i)), mean_w) * data.reward(i);
    return total / static_cast<double>(data.size());
}

// DR family: importance sampling only on the residual,
//   (1/n) sum_i [ T(w_i)(r_i - qhat(x_i,a_i)) + sum_a pi_e(a|x_i) qhat(x_i,a) ].
// Covers DR, DRps, SNDR, Switch, DRos, DR-lambda through the transform.
inline double estimate_dr(const Policy& pi_e, const LoggedDataset& data, const CrossFitModels& models,
                          const WeightTransform& t) {
    const Vec w = importance_ratios(pi_e, data);
    double mean_w = 1.0;
    if (t.kind == TransformKind::SelfNormalize) {
        mean_w = w.mean();
        if (mean_w == 0.0) throw std::domain_error("estimate_dr: all weights zero under self-normalization");
    }
    const int n_act = pi_e.n_actions();
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec p = pi_e.action_probs(data.context(i));
        double dm = 0.0;
        for (int a = 0; a < n_act; ++a) dm += p(a) * models.predict_logged(data, i, a);
        const double qi = models.predict_logged(data, i, data.action(i));
        total += t.apply(w(static_cast<Eigen::Index>(i)), mean_w) * (data.reward(i) - qi) + dm;
    }
    return total / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Candidate estimator classes (family x reward model), the unit the
// selection methods choose among.
enum class Family { DM, IPSps, DRps, SNIPS, SNDR, Switch, DRos, IPSLambda, DRLambda };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::DM: return "DM";
        case Family::IPSps: return "IPSps";
        case Family::DRps: return "DRps";
        case Family::SNIPS: return "SNIPS";
        case Family::SNDR: return "SNDR";
        case Family::Switch: return "Switch";
        case Family::DRos: return "DRos";
        case Family::IPSLambda: return "IPS-lambda";
        case Family::DRLambda: return "DR-lambda";
    }
    return "?";
}

inline bool family_needs_reward_model(Family f) {
    switch (f) {
        case Family::DM:
        case Family::DRps:
        case Family::SNDR:
        case Family::Switch:
        case Family::DRos:
        case Family::DRLambda:
            return true;
        default:
            return false;
    }
}

inline bool family_is_dr_type(Family f) {
    return f == Family::DRps || f == Family::SNDR || f == Family::Switch || f == Family::DRos ||
           f == Family::DRLambda;
}

struct EstimatorCandidate {
    Family family = Family::DM;
    RegressorKind regressor = RegressorKind::None;
    std::vector<double> grid;  // SLOPE-ordered hyperparameter candidates; empty if none

    std::string name() const {
        std::string s = family_name(family);
        if (regressor != RegressorKind::None) {
            s += "-";
            s += regressor_name(regressor);
        }
        return s;
    }
};

inline WeightTransform transform_for(Family f, double lambda) {
    switch (f) {
        case Family::IPSps:
        case Family::DRps:
            return clip_transform(lambda);
        case Family::SNIPS:
        case Family::SNDR:
            return self_normalize_transform();
        case Family::Switch:
            return switch_transform(lambda);
        case Family::DRos:
            return dros_transform(lambda);
        case Family::IPSLambda:
        case Family::DRLambda:
            return lambda_sub_transform(lambda);
        default:
            return identity_transform();
    }
}

// Hyperparameter grids in SLOPE order: the first entry is the low-bias,
// high-variance end, so the confidence widths are non-increasing along the
// list. Clipping-style families run lambda from infinity down; the
// subgaussian shrinkage runs lambda from 0.1 up to 1.
inline std::vector<double> clipping_grid_slope_order() {
    return {kInf, 1e5, 5e4, 1e4, 5e3, 1e3, 5e2, 1e2};
}

inline std::vector<double> lambda_sub_grid_slope_order() {
    return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

inline std::vector<double> grid_for(Family f) {
    switch (f) {
        case Family::IPSps:
        case Family::DRps:
        case Family::Switch:
        case Family::DRos:
            return clipping_grid_slope_order();
        case Family::IPSLambda:
        case Family::DRLambda:
            return lambda_sub_grid_slope_order();
        default:
            return {};
    }
}

// The M = 21 candidate set: DM x3, IPSps, DRps x3, SNIPS, SNDR x3,
// Switch x3, DRos x3, IPS-lambda, DR-lambda x3.
inline std::vector<EstimatorCandidate> make_candidate_set() {
    const std::vector<RegressorKind> regs = {RegressorKind::Logistic, RegressorKind::BoostedStumps,
                                             RegressorKind::Knn};
    std::vector<EstimatorCandidate> out;
    auto add = [&](Family f) {
        if (family_needs_reward_model(f)) {
            for (RegressorKind r : regs) out.push_back({f, r, grid_for(f)});
        } else {
            out.push_back({f, RegressorKind::None, grid_for(f)});
        }
    };
    add(Family::DM);
    add(Family::IPSps);
    add(Family::DRps);
    add(Family::SNIPS);
    add(Family::SNDR);
    add(Family::Switch);
    add(Family::DRos);
    add(Family::IPSLambda);
    add(Family::DRLambda);
    return out;
}

}  // namespace opesel
