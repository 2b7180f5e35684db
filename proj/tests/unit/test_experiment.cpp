#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "opesel/experiment.hpp"

using namespace opesel;

namespace {

const char* kTinySelect = R"(
[environment]
dim = 4
n_actions = 4
seed = 7

[behavior]
betas = -2, 2
weights = 0.5, 0.5
n = 200

[evaluation]
beta_e = -10, 0, 10

[pasif]
k = 0.2
eta = 0.01
steps = 15
lambda_grid = 1000
n_seeds = 2

[heuristic]
n_seeds = 2

[oracle]
n_mc = 2000
n_reps = 3

[run]
n_sims = 2
base_seed = 1

[output]
out_dir = OUTDIR
prefix = tiny
)";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
}

std::string tiny_config(const std::string& out_dir) {
    std::string text = kTinySelect;
    const auto pos = text.find("OUTDIR");
    text.replace(pos, 6, out_dir);
    return text;
}

}  // namespace

TEST_CASE("config parsing", "[experiment][config]") {
    SECTION("values and defaults") {
        const auto ini = IniFile::parse_string(tiny_config("/tmp/x"));
        const auto cfg = ExperimentConfig::from_ini(ini);
        CHECK(cfg.dim == 4);
        CHECK(cfg.n == 200);
        CHECK(cfg.beta_e == std::vector<double>{-10.0, 0.0, 10.0});
        CHECK(cfg.method == SelectionMethod::Both);
        CHECK(cfg.pasif.steps == 15);
        CHECK(cfg.pasif.band_lo == 0.18);
        CHECK(cfg.heuristic.n_seeds == 2);
        CHECK(cfg.k_folds == 3);
    }

    SECTION("parse errors carry line and field information") {
        CHECK_THROWS_WITH(IniFile::parse_string("[a\n", "t"), Catch::Matchers::ContainsSubstring("t:1"));
        CHECK_THROWS_WITH(IniFile::parse_string("[a]\nnonsense\n", "t"),
                          Catch::Matchers::ContainsSubstring("t:2"));
        const auto ini = IniFile::parse_string("[behavior]\nbetas = 1, x\n", "t");
        CHECK_THROWS_WITH(ExperimentConfig::from_ini(ini), Catch::Matchers::ContainsSubstring("betas"));
    }

    SECTION("missing required evaluation sweep") {
        const auto ini = IniFile::parse_string("[behavior]\nbetas = 1, 2\n");
        CHECK_THROWS_AS(ExperimentConfig::from_ini(ini), std::runtime_error);
    }

    SECTION("infinity spelled in lists") {
        const auto ini = IniFile::parse_string("[x]\ngrid = 100, inf\n");
        const auto grid = ini.get_double_list("x", "grid");
        CHECK(grid.size() == 2);
        CHECK(std::isinf(grid[1]));
    }
}

TEST_CASE("estimator-selection runner emits the documented tables", "[experiment]") {
    const std::string out = "/tmp/opesel_test_select";
    std::filesystem::remove_all(out);
    const auto ini = IniFile::parse_string(tiny_config(out));
    const auto cfg = ExperimentConfig::from_ini(ini);

    const auto art = run_estimator_selection_experiment(cfg, 1, &ini);
    CHECK(art.n_errors == 0);

    const std::string detail = read_file(art.detail_csv);
    const std::string agg = read_file(art.aggregate_csv);

    SECTION("row counts: 3 betas x 2 sims x both methods") {
        CHECK(count_lines(detail) == 1 + 12);
        CHECK(count_lines(agg) == 1 + 6);
        CHECK(detail.rfind("method,beta_e,seed,selected_candidate,est_mse_selected,true_mse_selected,"
                           "true_mse_best,rregret_e,rank_corr_e,error\n",
                           0) == 0);
    }

    SECTION("reruns are byte-identical and worker-count independent") {
        const auto art2 = run_estimator_selection_experiment(cfg, 1, &ini);
        CHECK(read_file(art2.detail_csv) == detail);
        const auto art3 = run_estimator_selection_experiment(cfg, 3, &ini);
        CHECK(read_file(art3.detail_csv) == detail);
        CHECK(read_file(art3.aggregate_csv) == agg);
    }

    SECTION("aggregates recompute from the detail rows") {
        std::istringstream in(detail);
        std::string line;
        std::getline(in, line);  // header
        std::map<std::string, std::vector<double>> regret;
        while (std::getline(in, line)) {
            std::vector<std::string> cells;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            REQUIRE(cells.size() >= 9);
            regret[cells[0] + "," + cells[1]].push_back(std::stod(cells[7]));
        }
        std::istringstream ain(agg);
        std::getline(ain, line);
        while (std::getline(ain, line)) {
            std::vector<std::string> cells;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            REQUIRE(cells.size() >= 8);
            const auto& rs = regret.at(cells[0] + "," + cells[1]);
            double mean = 0.0;
            for (double r : rs) mean += r;
            mean /= rs.size();
            CHECK(std::stod(cells[3]) == Catch::Approx(mean).margin(1e-9));
            double sd = 0.0;
            for (double r : rs) sd += (r - mean) * (r - mean);
            sd = rs.size() > 1 ? std::sqrt(sd / (rs.size() - 1)) : 0.0;
            CHECK(std::stod(cells[4]) == Catch::Approx(sd).margin(1e-9));
        }
    }

    SECTION("manifest carries the config echo and run metadata") {
        const auto manifest = nlohmann::json::parse(read_file(art.manifest_json));
        CHECK(manifest["experiment"] == "estimator_selection");
        CHECK(manifest["n_errors"] == 0);
        CHECK(manifest["config"]["behavior.n"] == "200");
        CHECK(manifest.contains("wall_seconds"));
    }
}

TEST_CASE("ops runner emits the documented tables", "[experiment][ops]") {
    const std::string out = "/tmp/opesel_test_ops";
    std::filesystem::remove_all(out);
    std::string text = tiny_config(out);
    text.replace(text.find("beta_e = -10, 0, 10"), 19, "ops = true");
    const auto ini = IniFile::parse_string(text);
    auto cfg = ExperimentConfig::from_ini(ini);
    REQUIRE(cfg.ops);

    const auto art = run_ops_experiment(cfg, 1, &ini);
    CHECK(art.n_errors == 0);
    const std::string detail = read_file(art.detail_csv);

    SECTION("2 sims x both methods, 20 candidates in every row") {
        CHECK(count_lines(detail) == 1 + 4);
        std::istringstream in(detail);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            std::vector<std::string> cells;
            std::stringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            REQUIRE(cells.size() >= 8);
            CHECK(cells[7] == "20");
            CHECK(std::stod(cells[5]) >= 0.0);  // regret column
        }
    }

    SECTION("byte-identical across worker counts") {
        const auto art2 = run_ops_experiment(cfg, 2, &ini);
        CHECK(read_file(art2.detail_csv) == detail);
    }
}

TEST_CASE("oracle runner writes per-candidate tables", "[experiment]") {
    const std::string out = "/tmp/opesel_test_oracle";
    std::filesystem::remove_all(out);
    std::string text = tiny_config(out);
    text.replace(text.find("beta_e = -10, 0, 10"), 19, "beta_e = 0, 5");
    const auto ini = IniFile::parse_string(text);
    const auto cfg = ExperimentConfig::from_ini(ini);

    const auto art = run_oracle_experiment(cfg, 1, &ini);
    const std::string csv = read_file(art.detail_csv);
    CHECK(count_lines(csv) == 1 + 2 * 21);
    CHECK(csv.rfind("beta_e,candidate,v_true,true_mse\n", 0) == 0);
}
