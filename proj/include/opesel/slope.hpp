#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace opesel {

// A hyperparameter tuning instance: candidates ordered so the confidence
// width CNF is non-increasing in index (equivalently bias non-decreasing).
struct TuningProblem {
    std::vector<double> lambdas;
    std::vector<double> estimates;
    std::vector<double> widths;

    std::size_t size() const { return estimates.size(); }
};

// Empirical Bernstein high-probability half-width for a mean estimate built
// from per-record contributions:
//   sqrt(2 Var ln(3/delta) / n) + 3 R ln(3/delta) / n,
// with Var the unbiased sample variance and R the largest contribution
// magnitude.
inline double cnf_width(std::span<const double> contributions, double delta = 0.05) {
    const std::size_t n = contributions.size();
    if (n < 2) throw std::invalid_argument("cnf_width: need at least 2 contributions");
    double mean = 0.0, max_abs = 0.0;
    for (double c : contributions) {
        mean += c;
        max_abs = std::max(max_abs, std::abs(c));
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double c : contributions) var += (c - mean) * (c - mean);
    var /= static_cast<double>(n - 1);
    const double log_term = std::log(3.0 / delta);
    return std::sqrt(2.0 * var * log_term / static_cast<double>(n)) +
           3.0 * max_abs * log_term / static_cast<double>(n);
}

// Lepski-style selection: walk down the ordered list and keep going while
// the new candidate's estimate stays inside the envelope
//   |V(m) - V(m')| <= CNF(m) + (sqrt(6) - 1) CNF(m')   for every m' < m.
// Stops at the first violation (prefix-maximal); index 0 is always feasible.
// Returns the 0-based selected index.
inline std::size_t slope_select(const TuningProblem& p) {
    const std::size_t m_max = p.size();
    if (m_max == 0) throw std::invalid_argument("slope_select: empty problem");
    if (p.estimates.size() != p.widths.size())
        throw std::invalid_argument("slope_select: estimates/widths size mismatch");
    const double c = std::sqrt(6.0) - 1.0;
    for (std::size_t m = 1; m < m_max; ++m) {
        for (std::size_t mp = 0; mp < m; ++mp) {
            if (std::abs(p.estimates[m] - p.estimates[mp]) > p.widths[m] + c * p.widths[mp])
                return m - 1;
        }
    }
    return m_max - 1;
}

}  // namespace opesel
