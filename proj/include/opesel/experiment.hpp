#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "opesel/config.hpp"
#include "opesel/selection.hpp"

namespace opesel {

inline constexpr const char* kVersion = "0.1.0";

// Scalar type used by experiment-path subsampler training. Tests exercise
// the same code in double precision.
using ExpScalar = float;

namespace detail {

// Fixed-format numeric cell so CSVs are byte-identical across reruns and
// worker counts.
inline std::string csv_num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

template <typename Fn>
void run_parallel(int workers, std::size_t n_tasks, Fn&& fn) {
    if (workers <= 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            fn(i);
        }
    };
    std::vector<std::thread> threads;
    const int n_threads = std::min<int>(workers, static_cast<int>(n_tasks));
    threads.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
struct SelectionRow {
    std::string method;
    double beta_e = 0.0;
    int seed = 0;  // simulation index
    std::string selected_candidate;
    double est_mse_selected = std::nan("");
    double true_mse_selected = std::nan("");
    double true_mse_best = std::nan("");
    double rregret_e = std::nan("");
    double rank_corr_e = std::nan("");
    std::string error;
};

struct OpsRow {
    std::string method;
    int seed = 0;
    std::string selected_policy;
    double value_selected_true = std::nan("");
    double value_best_true = std::nan("");
    double rregret_p = std::nan("");
    double rank_corr_p = std::nan("");
    int n_candidates = 0;
    std::string error;
};

struct RunArtifacts {
    std::string detail_csv;
    std::string aggregate_csv;
    std::string manifest_json;
    int n_errors = 0;
};

namespace detail {

struct Workspace {
    std::shared_ptr<const SyntheticEnvironment> env;
    std::vector<PolicyPtr> components;
    std::shared_ptr<const MixturePolicy> behavior;
    std::vector<EstimatorCandidate> candidates;

    explicit Workspace(const ExperimentConfig& cfg) {
        env = std::make_shared<SyntheticEnvironment>(cfg.dim, cfg.n_actions, cfg.env_seed);
        for (double b : cfg.behavior_betas) components.push_back(softmax_policy(env, b));
        behavior = std::make_shared<MixturePolicy>(components, cfg.behavior_weights);
        candidates = make_candidate_set();
    }
};

inline std::string method_name(bool pasif) { return pasif ? "pasif" : "heuristic"; }

inline std::vector<bool> methods_of(const ExperimentConfig& cfg) {
    switch (cfg.method) {
        case SelectionMethod::Pasif: return {true};
        case SelectionMethod::Heuristic: return {false};
        default: return {true, false};
    }
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

inline nlohmann::json manifest_base(const ExperimentConfig& cfg, const IniFile* ini, int workers,
                                    double wall_seconds, int n_errors) {
    nlohmann::json j;
    j["library"] = "opesel";
    j["version"] = kVersion;
    j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    j["workers"] = workers;
    j["wall_seconds"] = wall_seconds;
    j["n_errors"] = n_errors;
    j["base_seed"] = cfg.base_seed;
    j["env_seed"] = cfg.env_seed;
    j["rng"] = "mt19937_64 + splitmix64 stream derivation; uniform = 53-bit mantissa, normal = Marsaglia polar";
    if (ini) {
        nlohmann::json cfg_echo;
        for (const auto& [k, v] : ini->raw()) cfg_echo[k] = v;
        j["config"] = cfg_echo;
    }
    return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Estimator-selection experiment: per (method, beta_e, sim) one detail row,
// per (method, beta_e) one aggregate row. The ground-truth oracle is shared
// by all rows of a given beta_e.
inline RunArtifacts run_estimator_selection_experiment(const ExperimentConfig& cfg, int workers,
                                                       const IniFile* ini = nullptr) {
    const auto t_start = std::chrono::steady_clock::now();
    if (cfg.ops) throw std::runtime_error("select experiment: config has ops = true");
    if (cfg.beta_e.empty()) throw std::runtime_error("select experiment: empty beta_e sweep");
    detail::Workspace ws(cfg);

    // Oracle phase: true value and per-candidate true MSE for every beta_e.
    GroundTruthOracle oracle(ws.env, ws.behavior, cfg.n, cfg.oracle_n_reps, cfg.k_folds,
                             derive_seed(cfg.base_seed, {0x6f72ULL}));
    std::vector<Vec> true_mse(cfg.beta_e.size());
    std::vector<double> v_true(cfg.beta_e.size());
    std::vector<PolicyPtr> eval_policies(cfg.beta_e.size());
    for (std::size_t bi = 0; bi < cfg.beta_e.size(); ++bi) {
        eval_policies[bi] = softmax_policy(ws.env, cfg.beta_e[bi]);
        v_true[bi] = oracle.true_value(*eval_policies[bi], cfg.oracle_n_mc);
        true_mse[bi] = oracle.mse_table(ws.candidates, *eval_policies[bi], v_true[bi]);
    }

    const auto methods = detail::methods_of(cfg);
    struct Task {
        std::size_t beta_idx;
        int sim;
        bool pasif;
    };
    std::vector<Task> tasks;
    for (bool pasif : methods)
        for (std::size_t bi = 0; bi < cfg.beta_e.size(); ++bi)
            for (int sim = 0; sim < cfg.n_sims; ++sim) tasks.push_back({bi, sim, pasif});

    std::vector<SelectionRow> rows(tasks.size());
    detail::run_parallel(workers, tasks.size(), [&](std::size_t ti) {
        const Task& t = tasks[ti];
        SelectionRow& row = rows[ti];
        row.method = detail::method_name(t.pasif);
        row.beta_e = cfg.beta_e[t.beta_idx];
        row.seed = t.sim;
        try {
            const auto data = sample_logged_data(
                *ws.env, *ws.behavior, cfg.n,
                derive_seed(cfg.base_seed, {0x64617461ULL, static_cast<std::uint64_t>(t.sim)}));
            Vec est;
            if (t.pasif) {
                PasifConfig pc = cfg.pasif;
                pc.train_seed = derive_seed(cfg.base_seed, {0x7073656cULL, static_cast<std::uint64_t>(t.sim),
                                                            t.beta_idx});
                est = pasif_mse_all<ExpScalar>(ws.candidates, data, *eval_policies[t.beta_idx], ws.behavior,
                                               pc, cfg.k_folds);
            } else {
                HeuristicConfig hc = cfg.heuristic;
                hc.seed = derive_seed(cfg.base_seed, {0x6873656cULL, static_cast<std::uint64_t>(t.sim),
                                                      t.beta_idx});
                est = heuristic_mse_all(ws.candidates, data, *ws.behavior, hc, cfg.k_folds);
            }
            const std::size_t m_hat = select_estimator(est);
            const Vec& truth = true_mse[t.beta_idx];
            row.selected_candidate = ws.candidates[m_hat].name();
            row.est_mse_selected = est(static_cast<Eigen::Index>(m_hat));
            row.true_mse_selected = truth(static_cast<Eigen::Index>(m_hat));
            row.true_mse_best = truth.minCoeff();
            row.rregret_e = relative_regret_e(truth, m_hat);
            row.rank_corr_e = spearman_rank_correlation(truth, est);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });

    // Emit CSVs in deterministic task order.
    std::string detail_csv =
        "method,beta_e,seed,selected_candidate,est_mse_selected,true_mse_selected,true_mse_best,"
        "rregret_e,rank_corr_e,error\n";
    int n_errors = 0;
    for (const auto& r : rows) {
        if (!r.error.empty()) ++n_errors;
        detail_csv += r.method + "," + detail::csv_num(r.beta_e) + "," + std::to_string(r.seed) + "," +
                      r.selected_candidate + "," + detail::csv_num(r.est_mse_selected) + "," +
                      detail::csv_num(r.true_mse_selected) + "," + detail::csv_num(r.true_mse_best) + "," +
                      detail::csv_num(r.rregret_e) + "," + detail::csv_num(r.rank_corr_e) + "," + r.error +
                      "\n";
    }

    std::string agg_csv =
        "method,beta_e,n_sims,mean_rregret_e,sd_rregret_e,mean_rank_corr_e,sd_rank_corr_e,n_errors\n";
    for (bool pasif : methods) {
        for (std::size_t bi = 0; bi < cfg.beta_e.size(); ++bi) {
            std::vector<double> regs, corrs;
            int errs = 0;
            for (const auto& r : rows) {
                if (r.method != detail::method_name(pasif) || r.beta_e != cfg.beta_e[bi]) continue;
                if (!r.error.empty()) {
                    ++errs;
                    continue;
                }
                regs.push_back(r.rregret_e);
                corrs.push_back(r.rank_corr_e);
            }
            agg_csv += detail::method_name(pasif) + "," + detail::csv_num(cfg.beta_e[bi]) + "," +
                       std::to_string(regs.size()) + "," + detail::csv_num(detail::mean_of(regs)) + "," +
                       detail::csv_num(detail::sd_of(regs)) + "," + detail::csv_num(detail::mean_of(corrs)) +
                       "," + detail::csv_num(detail::sd_of(corrs)) + "," + std::to_string(errs) + "\n";
        }
    }

    std::filesystem::create_directories(cfg.out_dir);
    RunArtifacts art;
    art.n_errors = n_errors;
    art.detail_csv = cfg.out_dir + "/" + cfg.prefix + "_detail.csv";
    art.aggregate_csv = cfg.out_dir + "/" + cfg.prefix + "_aggregate.csv";
    art.manifest_json = cfg.out_dir + "/" + cfg.prefix + "_manifest.json";
    detail::write_file(art.detail_csv, detail_csv);
    detail::write_file(art.aggregate_csv, agg_csv);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    auto manifest = detail::manifest_base(cfg, ini, workers, wall, n_errors);
    manifest["experiment"] = "estimator_selection";
    manifest["n_candidates"] = ws.candidates.size();
    detail::write_file(art.manifest_json, manifest.dump(2) + "\n");
    return art;
}

// ---------------------------------------------------------------------------
// True values of many policies on a shared Monte-Carlo context batch; the
// expected reward is computed once per context.
inline Vec true_policy_values_shared(const SyntheticEnvironment& env, const std::vector<OpsCandidate>& pols,
                                     std::size_t n_mc, std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0x76616c7565ULL}));
    Vec totals = Vec::Zero(pols.size());
    Vec x(env.dim());
    for (std::size_t i = 0; i < n_mc; ++i) {
        for (int d = 0; d < env.dim(); ++d) x(d) = rng.normal();
        const Vec q = env.expected_rewards(x);
        for (std::size_t p = 0; p < pols.size(); ++p)
            totals(static_cast<Eigen::Index>(p)) += pols[p].policy->action_probs(x).dot(q);
    }
    return totals / static_cast<double>(n_mc);
}

// Policy-selection experiment: per (method, sim) one detail row.
inline RunArtifacts run_ops_experiment(const ExperimentConfig& cfg, int workers, const IniFile* ini = nullptr) {
    const auto t_start = std::chrono::steady_clock::now();
    if (!cfg.ops) throw std::runtime_error("ops experiment: config lacks ops = true");
    detail::Workspace ws(cfg);
    const auto methods = detail::methods_of(cfg);

    struct Task {
        int sim;
        bool pasif;
    };
    std::vector<Task> tasks;
    for (bool pasif : methods)
        for (int sim = 0; sim < cfg.n_sims; ++sim) tasks.push_back({sim, pasif});

    std::vector<OpsRow> rows(tasks.size());
    detail::run_parallel(workers, tasks.size(), [&](std::size_t ti) {
        const Task& t = tasks[ti];
        OpsRow& row = rows[ti];
        row.method = detail::method_name(t.pasif);
        row.seed = t.sim;
        try {
            const std::uint64_t sim_tag = static_cast<std::uint64_t>(t.sim);
            const auto data = sample_logged_data(*ws.env, *ws.behavior, cfg.n,
                                                 derive_seed(cfg.base_seed, {0x64617461ULL, sim_tag}));
            const auto pols = build_ops_candidates(data, cfg.n_actions, cfg.k_folds,
                                                   derive_seed(cfg.base_seed, {0x6f7063ULL, sim_tag}));
            row.n_candidates = static_cast<int>(pols.size());
            const Vec values = true_policy_values_shared(*ws.env, pols, cfg.oracle_n_mc,
                                                         derive_seed(cfg.base_seed, {0x6f7076ULL, sim_tag}));

            DatasetEval de(data, cfg.k_folds, derive_seed(cfg.base_seed, {0x6f706378ULL, sim_tag}));
            de.declare_actions(cfg.n_actions);

            OpsSelection sel;
            if (t.pasif) {
                PasifConfig pc = cfg.pasif;
                pc.train_seed = derive_seed(cfg.base_seed, {0x6f707073ULL, sim_tag});
                sel = ops_select(pols, ws.candidates, de, [&](const Policy& pi) {
                    return pasif_mse_all<ExpScalar>(ws.candidates, data, pi, ws.behavior, pc, cfg.k_folds);
                });
            } else {
                HeuristicConfig hc = cfg.heuristic;
                hc.seed = derive_seed(cfg.base_seed, {0x6f706873ULL, sim_tag});
                sel = ops_select(pols, ws.candidates, de, [&](const Policy&) {
                    return heuristic_mse_all(ws.candidates, data, *ws.behavior, hc, cfg.k_folds);
                });
            }
            row.selected_policy = pols[sel.chosen].name;
            row.value_selected_true = values(static_cast<Eigen::Index>(sel.chosen));
            row.value_best_true = values.maxCoeff();
            row.rregret_p = relative_regret_p(values, sel.chosen);
            row.rank_corr_p = spearman_rank_correlation(values, sel.est_values);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });

    std::string detail_csv =
        "method,seed,selected_policy,value_selected_true,value_best_true,rregret_p,rank_corr_p,"
        "n_candidates,error\n";
    int n_errors = 0;
    for (const auto& r : rows) {
        if (!r.error.empty()) ++n_errors;
        detail_csv += r.method + "," + std::to_string(r.seed) + "," + r.selected_policy + "," +
                      detail::csv_num(r.value_selected_true) + "," + detail::csv_num(r.value_best_true) +
                      "," + detail::csv_num(r.rregret_p) + "," + detail::csv_num(r.rank_corr_p) + "," +
                      std::to_string(r.n_candidates) + "," + r.error + "\n";
    }

    std::string agg_csv = "method,n_sims,mean_rregret_p,sd_rregret_p,mean_rank_corr_p,sd_rank_corr_p,n_errors\n";
    for (bool pasif : methods) {
        std::vector<double> regs, corrs;
        int errs = 0;
        for (const auto& r : rows) {
            if (r.method != detail::method_name(pasif)) continue;
            if (!r.error.empty()) {
                ++errs;
                continue;
            }
            regs.push_back(r.rregret_p);
            corrs.push_back(r.rank_corr_p);
        }
        agg_csv += detail::method_name(pasif) + "," + std::to_string(regs.size()) + "," +
                   detail::csv_num(detail::mean_of(regs)) + "," + detail::csv_num(detail::sd_of(regs)) + "," +
                   detail::csv_num(detail::mean_of(corrs)) + "," + detail::csv_num(detail::sd_of(corrs)) +
                   "," + std::to_string(errs) + "\n";
    }

    std::filesystem::create_directories(cfg.out_dir);
    RunArtifacts art;
    art.n_errors = n_errors;
    art.detail_csv = cfg.out_dir + "/" + cfg.prefix + "_detail.csv";
    art.aggregate_csv = cfg.out_dir + "/" + cfg.prefix + "_aggregate.csv";
    art.manifest_json = cfg.out_dir + "/" + cfg.prefix + "_manifest.json";
    detail::write_file(art.detail_csv, detail_csv);
    detail::write_file(art.aggregate_csv, agg_csv);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    auto manifest = detail::manifest_base(cfg, ini, workers, wall, n_errors);
    manifest["experiment"] = "ops";
    manifest["n_policy_candidates"] = rows.empty() ? 0 : rows.front().n_candidates;
    detail::write_file(art.manifest_json, manifest.dump(2) + "\n");
    return art;
}

// Ground-truth tables only.
inline RunArtifacts run_oracle_experiment(const ExperimentConfig& cfg, int workers, const IniFile* ini = nullptr) {
    const auto t_start = std::chrono::steady_clock::now();
    if (cfg.beta_e.empty()) throw std::runtime_error("oracle experiment: empty beta_e sweep");
    detail::Workspace ws(cfg);
    GroundTruthOracle oracle(ws.env, ws.behavior, cfg.n, cfg.oracle_n_reps, cfg.k_folds,
                             derive_seed(cfg.base_seed, {0x6f72ULL}));

    std::string csv = "beta_e,candidate,v_true,true_mse\n";
    for (double beta : cfg.beta_e) {
        const auto pi_e = softmax_policy(ws.env, beta);
        const double v = oracle.true_value(*pi_e, cfg.oracle_n_mc);
        const Vec mses = oracle.mse_table(ws.candidates, *pi_e, v);
        for (std::size_t m = 0; m < ws.candidates.size(); ++m)
            csv += detail::csv_num(beta) + "," + ws.candidates[m].name() + "," + detail::csv_num(v) + "," +
                   detail::csv_num(mses(static_cast<Eigen::Index>(m))) + "\n";
    }

    std::filesystem::create_directories(cfg.out_dir);
    RunArtifacts art;
    art.detail_csv = cfg.out_dir + "/" + cfg.prefix + "_oracle.csv";
    art.aggregate_csv.clear();
    art.manifest_json = cfg.out_dir + "/" + cfg.prefix + "_oracle_manifest.json";
    detail::write_file(art.detail_csv, csv);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    auto manifest = detail::manifest_base(cfg, ini, workers, wall, 0);
    manifest["experiment"] = "oracle";
    detail::write_file(art.manifest_json, manifest.dump(2) + "\n");
    return art;
}

}  // namespace opesel
