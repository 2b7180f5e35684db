#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <memory>

#include "opesel/estimators.hpp"
#include "opesel/evaluate.hpp"

using namespace opesel;

namespace {

class TablePolicy final : public Policy {
public:
    explicit TablePolicy(Vec probs) : probs_(std::move(probs)) {}
    int n_actions() const override { return static_cast<int>(probs_.size()); }
    Vec action_probs(const Vec&) const override { return probs_; }

private:
    Vec probs_;
};

// q_hat that depends only on the action; enough to hand-compute sums.
class ActionTableModel final : public RewardModel {
public:
    explicit ActionTableModel(Vec q) : q_(std::move(q)) {}
    double predict(const Vec&, int a) const override { return q_(a); }
    RegressorKind kind() const override { return RegressorKind::Logistic; }

private:
    Vec q_;
};

CrossFitModels one_model(std::size_t n, RewardModelPtr m) {
    CrossFitModels cf;
    cf.fold_of.assign(n, 0);
    cf.models = {std::move(m)};
    cf.regressor = RegressorKind::Logistic;
    return cf;
}

std::shared_ptr<const SyntheticEnvironment> env10() {
    return std::make_shared<SyntheticEnvironment>(10, 10, 42);
}

LoggedDataset sample200(std::shared_ptr<const SyntheticEnvironment> env) {
    std::vector<PolicyPtr> comps = {softmax_policy(env, -2.0), softmax_policy(env, 2.0)};
    MixturePolicy mix(comps, {0.5, 0.5});
    return sample_logged_data(*env, mix, 200, 3);
}

}  // namespace

TEST_CASE("weight transforms", "[estimators]") {
    CHECK(clip_transform(5.0).apply(3.0) == 3.0);
    CHECK(clip_transform(5.0).apply(9.0) == 5.0);
    CHECK(clip_transform(5.0).apply(5.0) == 5.0);  // tie counts as "not large"
    CHECK(clip_transform(kInf).apply(1e9) == 1e9);

    CHECK(switch_transform(5.0).apply(5.0) == 5.0);
    CHECK(switch_transform(5.0).apply(5.0 + 1e-9) == 0.0);

    CHECK(dros_transform(0.0).apply(3.0) == 0.0);
    CHECK(dros_transform(kInf).apply(3.0) == 3.0);
    CHECK(dros_transform(2.0).apply(3.0) == Catch::Approx(2.0 * 3.0 / (9.0 + 2.0)));

    // s = -1 subgaussian shrinkage: w / ((1-lambda) + lambda w)
    CHECK(lambda_sub_transform(0.0).apply(7.0) == Catch::Approx(7.0));
    CHECK(lambda_sub_transform(1.0).apply(7.0) == 1.0);
    CHECK(lambda_sub_transform(1.0).apply(0.0) == 1.0);
    CHECK(lambda_sub_transform(0.5).apply(4.0) == Catch::Approx(4.0 / (0.5 + 2.0)));
    CHECK(lambda_sub_transform(0.5).apply(0.0) == 0.0);
}

TEST_CASE("DM is the cross-fitted double sum", "[estimators]") {
    auto env = env10();
    const auto data = sample200(env);

    SECTION("constant q_hat passes through") {
        const auto cf = one_model(data.size(), std::make_shared<ConstantRewardModel>(0.37, RegressorKind::Logistic));
        auto pi_e = softmax_policy(env, 4.0);
        CHECK(estimate_dm(*pi_e, data, cf) == Catch::Approx(0.37).margin(1e-12));
    }

    SECTION("hand-computed double sum on a 4-record instance") {
        Mat c = Mat::Zero(4, 2);
        LoggedDataset tiny(c, {0, 1, 0, 1}, Vec{{1.0, 0.0, 1.0, 1.0}}, Vec{{0.5, 0.5, 0.5, 0.5}},
                           {0, 0, 0, 0});
        TablePolicy pi_e(Vec{{0.3, 0.7}});
        const Vec q{{0.2, 0.9}};
        const auto cf = one_model(4, std::make_shared<ActionTableModel>(q));
        // brute-force oracle: (1/4) sum_i sum_a pi(a) q(a), identical rows
        double oracle = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int a = 0; a < 2; ++a) oracle += (a == 0 ? 0.3 : 0.7) * q(a);
        oracle /= 4.0;
        CHECK(estimate_dm(pi_e, tiny, cf) == Catch::Approx(oracle).margin(1e-14));
    }
}

TEST_CASE("IPS family arithmetic", "[estimators]") {
    auto env = env10();
    std::vector<PolicyPtr> comps = {softmax_policy(env, -2.0), softmax_policy(env, 2.0)};
    auto mix = std::make_shared<MixturePolicy>(comps, std::vector<double>{0.5, 0.5});
    const auto data = sample_logged_data(*env, *mix, 200, 3);

    SECTION("pi_e = pi_b reduces IPS to the sample mean reward") {
        CHECK(estimate_ips(*mix, data, identity_transform()) ==
              Catch::Approx(data.mean_reward()).margin(1e-10));
    }

    SECTION("clip at infinity equals plain IPS") {
        auto pi_e = softmax_policy(env, 6.0);
        CHECK(estimate_ips(*pi_e, data, clip_transform(kInf)) ==
              estimate_ips(*pi_e, data, identity_transform()));
    }

    SECTION("lambda = 1 subgaussian weight gives the sample mean reward") {
        auto pi_e = softmax_policy(env, 6.0);
        CHECK(estimate_ips(*pi_e, data, lambda_sub_transform(1.0)) ==
              Catch::Approx(data.mean_reward()).margin(1e-12));
    }

    SECTION("five-record hand sum") {
        Mat c = Mat::Zero(5, 1);
        const Vec r{{1.0, 0.0, 1.0, 1.0, 0.0}};
        const Vec prop{{0.5, 0.25, 0.2, 0.4, 0.8}};
        LoggedDataset tiny(c, {0, 1, 1, 0, 1}, r, prop, {0, 0, 0, 0, 0});
        TablePolicy pi_e(Vec{{0.6, 0.4}});
        // spreadsheet oracle: w_i = pi_e(a_i) / prop_i
        double oracle = 0.0;
        const double pe[2] = {0.6, 0.4};
        const int acts[5] = {0, 1, 1, 0, 1};
        for (int i = 0; i < 5; ++i) oracle += pe[acts[i]] / prop(i) * r(i);
        oracle /= 5.0;
        CHECK(estimate_ips(pi_e, tiny, identity_transform()) == Catch::Approx(oracle).margin(1e-14));
    }

    SECTION("self-normalized weights average to one, all-zero weights throw") {
        auto pi_e = softmax_policy(env, 6.0);
        const Vec w = importance_ratios(*pi_e, data);
        const Vec wn = w / w.mean();
        CHECK(wn.mean() == Catch::Approx(1.0).margin(1e-12));

        TablePolicy never(Vec{{1.0, 0.0}});
        Mat c = Mat::Zero(2, 1);
        LoggedDataset zeros(c, {1, 1}, Vec{{1.0, 1.0}}, Vec{{0.5, 0.5}}, {0, 0});
        CHECK_THROWS_AS(estimate_ips(never, zeros, self_normalize_transform()), std::domain_error);
    }
}

TEST_CASE("DR family identities", "[estimators]") {
    auto env = env10();
    const auto data = sample200(env);
    auto pi_e = softmax_policy(env, 6.0);
    const auto cf = cross_fit_reward_model(data, RegressorKind::Logistic, 3, 5);

    SECTION("Switch at lambda = 0 equals DM exactly") {
        CHECK(estimate_dr(*pi_e, data, cf, switch_transform(0.0)) == estimate_dm(*pi_e, data, cf));
    }

    SECTION("DRos at huge lambda matches plain DR to 1e-6 relative") {
        const double dr = estimate_dr(*pi_e, data, cf, identity_transform());
        const double dros = estimate_dr(*pi_e, data, cf, dros_transform(1e12));
        CHECK(std::abs(dros - dr) <= 1e-6 * std::abs(dr));
    }

    SECTION("q_hat equal to the realized rewards leaves only the model term") {
        // residual vanishes record-for-record
        Mat c = Mat::Zero(3, 1);
        LoggedDataset tiny(c, {0, 1, 0}, Vec{{1.0, 0.0, 1.0}}, Vec{{0.5, 0.5, 0.5}}, {0, 0, 0});
        // q(a=0)=1, q(a=1)=0 matches every realized reward here
        const auto table = one_model(3, std::make_shared<ActionTableModel>(Vec{{1.0, 0.0}}));
        TablePolicy pe(Vec{{0.5, 0.5}});
        CHECK(estimate_dr(pe, tiny, table, identity_transform()) == estimate_dm(pe, tiny, table));
    }

    SECTION("q_hat = 0 reduces DR to IPS exactly") {
        const auto zero = one_model(data.size(), std::make_shared<ConstantRewardModel>(0.0, RegressorKind::Logistic));
        CHECK(estimate_dr(*pi_e, data, zero, identity_transform()) ==
              estimate_ips(*pi_e, data, identity_transform()));
    }

    SECTION("Switch interpolates DR and DM record-by-record") {
        const Vec w = importance_ratios(*pi_e, data);
        for (double lambda : {0.5, 1.0, 2.0, 5.0}) {
            for (std::size_t i = 0; i < 40; ++i) {
                const Vec p = pi_e->action_probs(data.context(i));
                double dm_i = 0.0;
                for (int a = 0; a < 10; ++a) dm_i += p(a) * cf.predict_logged(data, i, a);
                const double qi = cf.predict_logged(data, i, data.action(i));
                const double dr_i = w(i) * (data.reward(i) - qi) + dm_i;
                const double sw_i =
                    switch_transform(lambda).apply(w(i)) * (data.reward(i) - qi) + dm_i;
                if (w(i) <= lambda)
                    CHECK(sw_i == dr_i);
                else
                    CHECK(sw_i == dm_i);
            }
        }
    }

    SECTION("toy DR hand sum") {
        Mat c = Mat::Zero(3, 1);
        const Vec r{{1.0, 0.0, 1.0}};
        const Vec prop{{0.4, 0.5, 0.25}};
        LoggedDataset tiny(c, {0, 1, 1}, r, prop, {0, 0, 0});
        TablePolicy pe(Vec{{0.7, 0.3}});
        const Vec q{{0.4, 0.6}};
        const auto table = one_model(3, std::make_shared<ActionTableModel>(q));
        const double dm_term = 0.7 * 0.4 + 0.3 * 0.6;
        const double pes[2] = {0.7, 0.3};
        const int acts[3] = {0, 1, 1};
        double oracle = 0.0;
        for (int i = 0; i < 3; ++i)
            oracle += pes[acts[i]] / prop(i) * (r(i) - q(acts[i])) + dm_term;
        oracle /= 3.0;
        CHECK(estimate_dr(pe, tiny, table, identity_transform()) == Catch::Approx(oracle).margin(1e-14));
    }
}

TEST_CASE("candidate set matches the published table", "[estimators]") {
    const auto cands = make_candidate_set();
    REQUIRE(cands.size() == 21);

    int with_model = 0, without = 0;
    for (const auto& c : cands) {
        if (family_needs_reward_model(c.family)) {
            CHECK(c.regressor != RegressorKind::None);
            ++with_model;
        } else {
            CHECK(c.regressor == RegressorKind::None);
            ++without;
        }
        if (c.family == Family::DM || c.family == Family::SNIPS || c.family == Family::SNDR)
            CHECK(c.grid.empty());
        else
            CHECK(!c.grid.empty());
    }
    CHECK(with_model == 18);  // six families x three regressors
    CHECK(without == 3);      // IPSps, SNIPS, IPS-lambda

    // grids: clipping-style from infinity down, subgaussian 0.1..1.0 up
    CHECK(clipping_grid_slope_order().front() == kInf);
    CHECK(clipping_grid_slope_order().back() == 100.0);
    CHECK(lambda_sub_grid_slope_order().front() == 0.1);
    CHECK(lambda_sub_grid_slope_order().back() == 1.0);
}

TEST_CASE("estimates stay finite for finite inputs", "[estimators]") {
    auto env = env10();
    const auto data = sample200(env);
    auto pi_e = softmax_policy(env, 10.0);
    const auto cf = cross_fit_reward_model(data, RegressorKind::Knn, 3, 5);
    for (double lambda : {100.0, 1e4, 1e5}) {
        CHECK(std::isfinite(estimate_ips(*pi_e, data, clip_transform(lambda))));
        CHECK(std::isfinite(estimate_dr(*pi_e, data, cf, dros_transform(lambda))));
        CHECK(std::isfinite(estimate_dr(*pi_e, data, cf, switch_transform(lambda))));
    }
    CHECK(std::isfinite(estimate_ips(*pi_e, data, self_normalize_transform())));
    CHECK(std::isfinite(estimate_dr(*pi_e, data, cf, lambda_sub_transform(0.3))));
}
