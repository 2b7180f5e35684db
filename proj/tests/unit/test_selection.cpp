#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <memory>

#include "opesel/selection.hpp"

using namespace opesel;

namespace {

std::shared_ptr<const SyntheticEnvironment> env10(std::uint64_t seed = 42) {
    return std::make_shared<SyntheticEnvironment>(10, 10, seed);
}

std::shared_ptr<const MixturePolicy> mixture2(std::shared_ptr<const SyntheticEnvironment> env) {
    std::vector<PolicyPtr> comps = {softmax_policy(env, -2.0), softmax_policy(env, 2.0)};
    return std::make_shared<MixturePolicy>(comps, std::vector<double>{0.5, 0.5});
}

}  // namespace

TEST_CASE("argmin selection with ties to the lowest index", "[selection]") {
    CHECK(select_estimator(Vec{{3.0, 1.0, 2.0}}) == 1);
    CHECK(select_estimator(Vec{{0.7}}) == 0);
    CHECK(select_estimator(Vec{{2.0, 2.0, 2.0}}) == 0);
    CHECK_THROWS_AS(select_estimator(Vec{}), std::invalid_argument);

    // invariance to positive scaling
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        Vec v(6);
        for (int i = 0; i < 6; ++i) v(i) = rng.uniform() + 0.01;
        CHECK(select_estimator(v) == select_estimator(Vec(3.7 * v)));
    }
}

TEST_CASE("relative regret over true MSEs", "[selection]") {
    CHECK(relative_regret_e(Vec{{1.0, 2.0}}, 0) == 0.0);
    CHECK(relative_regret_e(Vec{{1.0, 2.0}}, 1) == Catch::Approx(1.0));
    CHECK(relative_regret_e(Vec{{4.0, 1.0, 2.0}}, 2) == Catch::Approx(1.0));
    CHECK_THROWS_AS(relative_regret_e(Vec{{0.0, 1.0}}, 1), std::domain_error);
    CHECK_THROWS_AS(relative_regret_e(Vec{{1.0}}, 3), std::out_of_range);
}

TEST_CASE("spearman rank correlation", "[selection]") {
    CHECK(spearman_rank_correlation(Vec{{1, 2, 3, 4}}, Vec{{10, 20, 30, 40}}) == Catch::Approx(1.0));
    CHECK(spearman_rank_correlation(Vec{{1, 2, 3, 4}}, Vec{{4, 3, 2, 1}}) == Catch::Approx(-1.0));
    CHECK(spearman_rank_correlation(Vec{{1, 2, 3, 4, 5}}, Vec{{1, 3, 2, 5, 4}}) == Catch::Approx(0.8));
    // ties get average ranks
    CHECK(spearman_rank_correlation(Vec{{1, 1, 2}}, Vec{{1, 2, 3}}) ==
          Catch::Approx(std::sqrt(3.0) / 2.0).margin(1e-12));
    CHECK_THROWS_AS(spearman_rank_correlation(Vec{{1, 1, 1}}, Vec{{1, 2, 3}}), std::domain_error);
    CHECK_THROWS_AS(spearman_rank_correlation(Vec{{1, 2}}, Vec{{1, 2, 3}}), std::invalid_argument);

    SECTION("invariant under strictly monotone transforms") {
        Rng rng(9);
        for (int t = 0; t < 20; ++t) {
            Vec a(7), b(7);
            for (int i = 0; i < 7; ++i) {
                a(i) = rng.normal();
                b(i) = rng.normal();
            }
            const double base = spearman_rank_correlation(a, b);
            const Vec a2 = (a.array() * 3.0 + 11.0).exp().matrix();
            CHECK(spearman_rank_correlation(a2, b) == Catch::Approx(base).margin(1e-12));
        }
    }
}

TEST_CASE("ground-truth oracle", "[selection][oracle]") {
    auto env = env10();
    auto mix = mixture2(env);

    SECTION("an estimator pinned at the true value has zero MSE") {
        GroundTruthOracle oracle(env, mix, 200, 5, 3, 7);
        auto pi_e = softmax_policy(env, 4.0);
        const double v = oracle.true_value(*pi_e, 20000);
        CHECK(oracle.mse_of([&](const Policy&, const LoggedDataset&) { return v; }, *pi_e, v) == 0.0);
        // and any nonconstant estimator's MSE is nonnegative
        const double mse = oracle.mse_of(
            [](const Policy& pe, const LoggedDataset& d) { return estimate_ips(pe, d, identity_transform()); },
            *pi_e, v);
        CHECK(mse >= 0.0);
    }

    SECTION("plain IPS true MSE grows with policy divergence, mean over 5 environments") {
        const EstimatorCandidate plain_ips{Family::IPSps, RegressorKind::None, {kInf}};
        double mse_sum[3] = {0.0, 0.0, 0.0};
        const double betas[3] = {0.0, 5.0, 10.0};
        for (std::uint64_t es = 1; es <= 5; ++es) {
            auto e = env10(es);
            auto m = mixture2(e);
            GroundTruthOracle oracle(e, m, 500, 30, 3, es * 13);
            for (int bi = 0; bi < 3; ++bi) {
                auto pe = softmax_policy(e, betas[bi]);
                const double v = oracle.true_value(*pe, 30000);
                mse_sum[bi] += oracle.mse_table({plain_ips}, *pe, v)(0);
            }
        }
        CHECK(mse_sum[0] < mse_sum[1]);
        CHECK(mse_sum[1] < mse_sum[2]);
    }
}

TEST_CASE("candidate policies for policy selection", "[selection][ops]") {
    auto env = env10();
    auto mix = mixture2(env);
    const auto data = sample_logged_data(*env, *mix, 500, 3);
    const auto pols = build_ops_candidates(data, 10, 3, 17);

    SECTION("twenty candidates, all with full support") {
        REQUIRE(pols.size() == 20);
        const Mat xs = sample_contexts(*env, 10, 5);
        for (const auto& p : pols) {
            CHECK(!p.name.empty());
            for (int i = 0; i < xs.rows(); ++i) {
                const Vec probs = p.policy->action_probs(xs.row(i));
                CHECK(std::abs(probs.sum() - 1.0) < 1e-10);
                CHECK(probs.minCoeff() > 0.0);
            }
        }
    }

    SECTION("sharper temperature on a learned scorer does not hurt, mean over 5 seeds") {
        double v1 = 0.0, v100 = 0.0;
        for (std::uint64_t s = 1; s <= 5; ++s) {
            const auto d = sample_logged_data(*env, *mix, 500, 100 + s);
            const auto cands = build_ops_candidates(d, 10, 3, s);
            // qlearner-logistic at beta 1 and beta 100 (grid order is known)
            REQUIRE(cands[0].name == "qlearner-logistic-b1");
            REQUIRE(cands[4].name == "qlearner-logistic-b100");
            v1 += true_policy_value(*env, *cands[0].policy, 20000, 55);
            v100 += true_policy_value(*env, *cands[4].policy, 20000, 55);
        }
        CHECK(v100 >= v1);
    }
}

TEST_CASE("policy selection glue", "[selection][ops]") {
    auto env = env10();
    auto mix = mixture2(env);
    const auto data = sample_logged_data(*env, *mix, 600, 19);

    // two easy-to-rank policies and a single candidate estimator
    std::vector<OpsCandidate> pols;
    pols.push_back({softmax_policy(env, 0.0), "uniform", false});
    pols.push_back({softmax_policy(env, 10.0), "sharp", false});
    const std::vector<EstimatorCandidate> cands = {{Family::DM, RegressorKind::Logistic, {}}};

    DatasetEval de(data, 3, 23);
    de.declare_actions(10);
    const auto sel = ops_select(pols, cands, de, [&](const Policy&) { return Vec{{1.0}}; });

    SECTION("degenerates to ranking by the single estimator's values") {
        Vec direct(2);
        for (int p = 0; p < 2; ++p) {
            const PolicyCache pc = make_policy_cache(data, *pols[p].policy);
            DatasetEval de2(data, 3, 23);
            de2.declare_actions(10);
            direct(p) = evaluate_candidate(cands[0], de2, pc);
        }
        std::size_t argmax = direct(0) >= direct(1) ? 0 : 1;
        CHECK(sel.chosen == argmax);
        CHECK(sel.est_values(0) == Catch::Approx(direct(0)));
        CHECK(sel.est_values(1) == Catch::Approx(direct(1)));
    }

    SECTION("regret vanishes when the best policy is chosen") {
        Vec truth(2);
        truth << true_policy_value(*env, *pols[0].policy, 20000, 3),
            true_policy_value(*env, *pols[1].policy, 20000, 3);
        if (sel.chosen == 1) CHECK(relative_regret_p(truth, sel.chosen) == 0.0);
        CHECK(relative_regret_p(truth, 1) == 0.0);
        CHECK(relative_regret_p(truth, 0) > 0.0);
    }
}

TEST_CASE("end-to-end OPE with data splitting", "[selection][e2e]") {
    auto env = env10();
    auto mix = mixture2(env);
    const auto data = sample_logged_data(*env, *mix, 600, 31);
    const auto cands = make_candidate_set();

    PasifConfig cfg;
    cfg.steps = 30;
    cfg.eta = 0.01;
    cfg.lambda_grid = {1000.0};
    cfg.n_seeds = 2;
    cfg.train_seed = 5;

    SECTION("on-policy sanity: evaluating pi_b lands near the sample mean reward") {
        const double v = end_to_end_ope<double>(cands, *mix, mix, data, {1, 2}, cfg, 3);
        const double mean = data.mean_reward();
        const double sd = std::sqrt((data.rewards().array() - mean).square().sum() / (data.size() - 1));
        CHECK(std::abs(v - mean) < 3.0 * sd / std::sqrt(static_cast<double>(data.size() / 2)));
    }

    SECTION("deterministic given seeds") {
        const double a = end_to_end_ope<double>(cands, *mix, mix, data, {1, 2}, cfg, 3);
        const double b = end_to_end_ope<double>(cands, *mix, mix, data, {1, 2}, cfg, 3);
        CHECK(a == b);
    }
}
