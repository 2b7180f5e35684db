#pragma once

#include <stdexcept>
#include <vector>

#include "opesel/bandit.hpp"
#include "opesel/pasif.hpp"

namespace opesel {

// Non-adaptive heuristic: one of the data collection policies serves as a
// pseudo evaluation policy, its own records as the on-policy reference.
struct HeuristicConfig {
    enum class Mode { RandomPerSeed, Fixed };
    Mode mode = Mode::RandomPerSeed;
    int fixed_index = 0;
    int n_seeds = 10;
    std::uint64_t seed = 0;
};

struct HeuristicSplit {
    PolicyPtr pseudo_eval;  // pi_j
    LoggedDataset d_rest;   // bootstrapped D_{b \ j} with renormalized propensities
    double v_on = 0.0;      // mean reward of D_j (not bootstrapped)
    int j = 0;
};

// Per bootstrap seed: pick j, split the data by policy index, bootstrap the
// remainder and relabel its propensities with the renormalized mixture over
// the remaining data collection policies.
inline std::vector<HeuristicSplit> heuristic_prepare(const LoggedDataset& data, const MixturePolicy& behavior,
                                                     const HeuristicConfig& cfg) {
    const std::size_t l = behavior.n_components();
    if (l < 2)
        throw std::invalid_argument("non-adaptive heuristic: needs at least two data collection policies");
    if (cfg.n_seeds < 1) throw std::invalid_argument("heuristic: need at least one seed");
    if (cfg.mode == HeuristicConfig::Mode::Fixed &&
        (cfg.fixed_index < 0 || cfg.fixed_index >= static_cast<int>(l)))
        throw std::invalid_argument("heuristic: fixed policy index out of range");

    std::vector<std::vector<std::size_t>> by_policy(l);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int j = data.policy_index(i);
        if (j < 0 || j >= static_cast<int>(l))
            throw std::invalid_argument("heuristic: record policy index outside the mixture");
        by_policy[j].push_back(i);
    }
    for (std::size_t j = 0; j < l; ++j)
        if (by_policy[j].empty())
            throw std::invalid_argument("heuristic: a data collection policy has no records");

    std::vector<HeuristicSplit> out;
    out.reserve(cfg.n_seeds);
    for (int s = 0; s < cfg.n_seeds; ++s) {
        int j = cfg.fixed_index;
        if (cfg.mode == HeuristicConfig::Mode::RandomPerSeed) {
            Rng rng(derive_seed(cfg.seed, {0x6a706963ULL, static_cast<std::uint64_t>(s)}));
            j = static_cast<int>(rng.uniform_int(l));
        }

        std::vector<std::size_t> rest;
        double v_on = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.policy_index(i) == j)
                v_on += data.reward(i);
            else
                rest.push_back(i);
        }
        v_on /= static_cast<double>(by_policy[j].size());
        if (rest.empty()) throw std::invalid_argument("heuristic: pseudo behavior partition is empty");

        LoggedDataset d_rest = data.gather(rest);
        const auto boot_idx =
            bootstrap_indices(d_rest.size(), derive_seed(cfg.seed, {0x68657572ULL, static_cast<std::uint64_t>(s)}));
        d_rest = d_rest.gather(boot_idx);

        // Renormalized mixture over the remaining policies: p(j') / (1 - p(j)).
        const double keep = 1.0 - behavior.weight(j);
        if (!(keep > 0.0)) throw std::invalid_argument("heuristic: remaining mixture weight is zero");
        Vec prop(d_rest.size());
        for (std::size_t i = 0; i < d_rest.size(); ++i) {
            const Vec x = d_rest.context(i);
            double p = 0.0;
            for (std::size_t jp = 0; jp < l; ++jp) {
                if (static_cast<int>(jp) == j) continue;
                p += behavior.weight(jp) / keep * behavior.component(jp)->prob(x, d_rest.action(i));
            }
            prop(static_cast<Eigen::Index>(i)) = p;
        }
        d_rest = d_rest.with_propensities(std::move(prop));

        out.push_back({behavior.component(j), std::move(d_rest), v_on, j});
    }
    return out;
}

// MSE estimate from prepared splits and any estimator evaluation routine.
template <typename Evaluator>
double estimate_mse_nonadaptive_from_splits(const std::vector<HeuristicSplit>& splits, Evaluator&& evaluate) {
    double total = 0.0;
    for (const auto& sp : splits) {
        const double gap = evaluate(*sp.pseudo_eval, sp.d_rest) - sp.v_on;
        total += gap * gap;
    }
    return total / static_cast<double>(splits.size());
}

}  // namespace opesel
