#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "opesel/baseline.hpp"
#include "opesel/pasif.hpp"

namespace opesel {

// Minimal INI-style reader: [section] headers, key = value lines, '#' or ';'
// comments. Parse errors carry the line number and field.
class IniFile {
public:
    static IniFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str(), path);
    }

    static IniFile parse_string(const std::string& text, const std::string& origin = "<string>") {
        IniFile f;
        f.origin_ = origin;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
            f.values_[section + "." + key] = value;
        }
        return f;
    }

    bool has(const std::string& section, const std::string& key) const {
        return values_.count(section + "." + key) > 0;
    }

    std::string get_string(const std::string& section, const std::string& key) const {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end())
            throw std::runtime_error(origin_ + ": missing required field [" + section + "] " + key);
        return it->second;
    }

    std::string get_string(const std::string& section, const std::string& key, const std::string& dflt) const {
        const auto it = values_.find(section + "." + key);
        return it == values_.end() ? dflt : it->second;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return to_double(section, key, get_string(section, key));
    }
    double get_double(const std::string& section, const std::string& key, double dflt) const {
        return has(section, key) ? get_double(section, key) : dflt;
    }

    long get_int(const std::string& section, const std::string& key) const {
        const std::string v = get_string(section, key);
        try {
            std::size_t pos = 0;
            const long r = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return r;
        } catch (...) {
            throw std::runtime_error(origin_ + ": field [" + section + "] " + key + ": not an integer: '" + v + "'");
        }
    }
    long get_int(const std::string& section, const std::string& key, long dflt) const {
        return has(section, key) ? get_int(section, key) : dflt;
    }

    bool get_bool(const std::string& section, const std::string& key, bool dflt) const {
        if (!has(section, key)) return dflt;
        const std::string v = get_string(section, key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw std::runtime_error(origin_ + ": field [" + section + "] " + key + ": not a boolean: '" + v + "'");
    }

    std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
        const std::string v = get_string(section, key);
        std::vector<double> out;
        std::istringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (tok.empty()) continue;
            out.push_back(to_double(section, key, tok));
        }
        if (out.empty())
            throw std::runtime_error(origin_ + ": field [" + section + "] " + key + ": empty list");
        return out;
    }

    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    double to_double(const std::string& section, const std::string& key, const std::string& v) const {
        if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
        try {
            std::size_t pos = 0;
            const double r = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return r;
        } catch (...) {
            throw std::runtime_error(origin_ + ": field [" + section + "] " + key + ": not a number: '" + v + "'");
        }
    }

    std::string origin_;
    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
enum class SelectionMethod { Pasif, Heuristic, Both };

struct ExperimentConfig {
    // [environment]
    int dim = 10;
    int n_actions = 10;
    std::uint64_t env_seed = 12345;

    // [behavior]
    std::vector<double> behavior_betas = {-2.0, 2.0};
    std::vector<double> behavior_weights = {0.5, 0.5};
    std::size_t n = 2000;

    // [evaluation]
    std::vector<double> beta_e;  // estimator-selection sweep
    bool ops = false;            // policy-selection experiment instead

    // [method]
    SelectionMethod method = SelectionMethod::Both;
    PasifConfig pasif;
    HeuristicConfig heuristic;
    int k_folds = 3;

    // [oracle]
    std::size_t oracle_n_mc = 100000;
    int oracle_n_reps = 50;

    // [run]
    int n_sims = 20;
    std::uint64_t base_seed = 0;
    int workers = 0;  // 0 = choose automatically

    // [output]
    std::string out_dir = "results";
    std::string prefix = "run";

    static ExperimentConfig from_ini(const IniFile& f) {
        ExperimentConfig c;
        c.dim = static_cast<int>(f.get_int("environment", "dim", 10));
        c.n_actions = static_cast<int>(f.get_int("environment", "n_actions", 10));
        c.env_seed = static_cast<std::uint64_t>(f.get_int("environment", "seed", 12345));

        c.behavior_betas = f.get_double_list("behavior", "betas");
        if (f.has("behavior", "weights")) {
            c.behavior_weights = f.get_double_list("behavior", "weights");
        } else {
            c.behavior_weights.assign(c.behavior_betas.size(), 1.0 / static_cast<double>(c.behavior_betas.size()));
        }
        if (c.behavior_betas.size() != c.behavior_weights.size())
            throw std::runtime_error("config: [behavior] betas and weights must have equal length");
        c.n = static_cast<std::size_t>(f.get_int("behavior", "n", 2000));

        c.ops = f.get_bool("evaluation", "ops", false);
        if (!c.ops) c.beta_e = f.get_double_list("evaluation", "beta_e");

        const std::string m = f.get_string("method", "method", "both");
        if (m == "pasif") c.method = SelectionMethod::Pasif;
        else if (m == "heuristic") c.method = SelectionMethod::Heuristic;
        else if (m == "both") c.method = SelectionMethod::Both;
        else throw std::runtime_error("config: [method] method must be pasif | heuristic | both");
        c.k_folds = static_cast<int>(f.get_int("method", "k_folds", 3));

        c.pasif.k = f.get_double("pasif", "k", 0.2);
        c.pasif.eta = f.get_double("pasif", "eta", 0.001);
        c.pasif.steps = static_cast<int>(f.get_int("pasif", "steps", 5000));
        if (f.has("pasif", "lambda_grid")) c.pasif.lambda_grid = f.get_double_list("pasif", "lambda_grid");
        c.pasif.n_seeds = static_cast<int>(f.get_int("pasif", "n_seeds", 10));
        c.pasif.band_lo = f.get_double("pasif", "band_lo", 0.18);
        c.pasif.band_hi = f.get_double("pasif", "band_hi", 0.22);
        const std::string grad = f.get_string("pasif", "gradient", "diagonal");
        if (grad == "diagonal") c.pasif.gradient = PasifGradientMode::Diagonal;
        else if (grad == "full") c.pasif.gradient = PasifGradientMode::Full;
        else throw std::runtime_error("config: [pasif] gradient must be diagonal | full");
        c.pasif.strict_alg1 = f.get_bool("pasif", "strict_alg1", false);
        c.pasif.validate();

        const std::string hm = f.get_string("heuristic", "mode", "random");
        if (hm == "random") c.heuristic.mode = HeuristicConfig::Mode::RandomPerSeed;
        else if (hm == "fixed") c.heuristic.mode = HeuristicConfig::Mode::Fixed;
        else throw std::runtime_error("config: [heuristic] mode must be random | fixed");
        c.heuristic.fixed_index = static_cast<int>(f.get_int("heuristic", "fixed_index", 0));
        c.heuristic.n_seeds = static_cast<int>(f.get_int("heuristic", "n_seeds", 10));

        c.oracle_n_mc = static_cast<std::size_t>(f.get_int("oracle", "n_mc", 100000));
        c.oracle_n_reps = static_cast<int>(f.get_int("oracle", "n_reps", 50));

        c.n_sims = static_cast<int>(f.get_int("run", "n_sims", 20));
        c.base_seed = static_cast<std::uint64_t>(f.get_int("run", "base_seed", 0));
        c.workers = static_cast<int>(f.get_int("run", "workers", 0));
        if (c.n_sims < 1) throw std::runtime_error("config: [run] n_sims must be >= 1");

        c.out_dir = f.get_string("output", "out_dir", "results");
        c.prefix = f.get_string("output", "prefix", "run");
        return c;
    }
};

}  // namespace opesel
