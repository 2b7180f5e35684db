#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "opesel/baseline.hpp"
#include "opesel/estimators.hpp"

using namespace opesel;

namespace {

std::shared_ptr<const SyntheticEnvironment> env10() {
    return std::make_shared<SyntheticEnvironment>(10, 10, 42);
}

std::shared_ptr<const MixturePolicy> mixture2(std::shared_ptr<const SyntheticEnvironment> env) {
    std::vector<PolicyPtr> comps = {softmax_policy(env, -2.0), softmax_policy(env, 2.0)};
    return std::make_shared<MixturePolicy>(comps, std::vector<double>{0.5, 0.5});
}

}  // namespace

TEST_CASE("heuristic preparation", "[baseline]") {
    auto env = env10();
    auto mix = mixture2(env);
    const auto data = sample_logged_data(*env, *mix, 800, 5);

    SECTION("fixed mode uses the same pseudo policy every seed") {
        HeuristicConfig cfg;
        cfg.mode = HeuristicConfig::Mode::Fixed;
        cfg.fixed_index = 1;
        cfg.n_seeds = 5;
        const auto splits = heuristic_prepare(data, *mix, cfg);
        REQUIRE(splits.size() == 5);
        for (const auto& sp : splits) {
            CHECK(sp.j == 1);
            // pseudo behavior keeps only the other policy's records
            for (std::size_t i = 0; i < sp.d_rest.size(); ++i) CHECK(sp.d_rest.policy_index(i) != 1);
        }
        // v_on is the plain mean reward of the held-out policy's records
        double sum = 0.0;
        int count = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.policy_index(i) == 1) {
                sum += data.reward(i);
                ++count;
            }
        }
        CHECK(splits[0].v_on == Catch::Approx(sum / count));
    }

    SECTION("random mode varies the pseudo policy with the seed") {
        HeuristicConfig cfg;
        cfg.n_seeds = 20;
        cfg.seed = 3;
        const auto splits = heuristic_prepare(data, *mix, cfg);
        std::set<int> seen;
        for (const auto& sp : splits) seen.insert(sp.j);
        CHECK(seen.size() == 2);
    }

    SECTION("removing a policy renormalizes the mixture propensity") {
        HeuristicConfig cfg;
        cfg.mode = HeuristicConfig::Mode::Fixed;
        cfg.fixed_index = 0;
        cfg.n_seeds = 1;
        const auto splits = heuristic_prepare(data, *mix, cfg);
        // two equal-weight policies: the remaining conditional mixture is
        // the other component alone
        const auto& rest = splits[0].d_rest;
        for (std::size_t i = 0; i < std::min<std::size_t>(rest.size(), 25); ++i)
            CHECK(rest.propensity(i) ==
                  Catch::Approx(mix->component(1)->prob(rest.context(i), rest.action(i))).margin(1e-12));
    }

    SECTION("a single data collection policy is rejected") {
        auto single = std::make_shared<MixturePolicy>(std::vector<PolicyPtr>{softmax_policy(env, 1.0)},
                                                      std::vector<double>{1.0});
        const auto d1 = sample_logged_data(*env, *single, 100, 6);
        HeuristicConfig cfg;
        CHECK_THROWS_AS(heuristic_prepare(d1, *single, cfg), std::invalid_argument);
    }
}

TEST_CASE("heuristic MSE estimate", "[baseline]") {
    auto env = env10();
    auto mix = mixture2(env);
    const auto data = sample_logged_data(*env, *mix, 600, 7);
    HeuristicConfig cfg;
    cfg.n_seeds = 6;
    cfg.seed = 11;
    const auto splits = heuristic_prepare(data, *mix, cfg);

    SECTION("an estimator matching the on-policy mean has zero estimated MSE") {
        std::size_t call = 0;
        const double mse = estimate_mse_nonadaptive_from_splits(
            splits, [&](const Policy&, const LoggedDataset&) { return splits[call++].v_on; });
        CHECK(mse == 0.0);
    }

    SECTION("estimated MSE is nonnegative for a plain estimator") {
        const double mse = estimate_mse_nonadaptive_from_splits(
            splits, [](const Policy& pj, const LoggedDataset& d) {
                return estimate_ips(pj, d, clip_transform(1000.0));
            });
        CHECK(mse >= 0.0);
        CHECK(std::isfinite(mse));
    }
}
