#pragma once

// Adiabaticity criterion for following psi_k while mu(t) changes:
//   Xi_k = mu_dot xi_k / (Gc sqrt(1 + nu^2)),
//   xi_k = max_{n = k +- 1} | 4 <psi_n^perp|Jz|psi_k> / (mu [2 mu^2 + (1 - mu^4) <psi_n^perp|Jz|psi_n^perp>]) |.
// Only the neighbours n = k +- 1 couple through d/dt psi_k, so the max over
// the complement reduces exactly to these two terms.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <stdexcept>
#include <vector>

#include "dfs/csv.hpp"
#include "dfs/dfs_eigen.hpp"
#include "dfs/log_math.hpp"

namespace dfs {

/// Below this mu, xi_k is only reported for N = 1 (closed form); the general
/// route carries a 1/mu prefactor.
inline constexpr double kXiMuMin = 1e-6;

namespace detail {

inline void check_neighbor(int n_atoms, int k, int n, const char* who) {
    check_index(n_atoms, k, who);
    if (std::abs(n - k) != 1 || n < 0 || n > n_atoms)
        throw std::invalid_argument(std::string(who) + ": neighbour must be k +- 1 inside [0, N]");
}

/// log |<psi_n^perp|Jz|psi_k> / mu| = log[(2 mu)^(N-1) N_k N_n^perp (N-k)! (k+1)!]  (n = k+1)
///                                  or log[(2 mu)^(N-1) N_k N_n^perp (N-k+1)! k!]  (n = k-1).
/// The matrix element itself is negative.
inline double log_jz_cross_over_mu(int n_atoms, int k, int n, double mu) {
    using namespace logmath;
    const double fact = n == k + 1 ? log_factorial(n_atoms - k) + log_factorial(k + 1)
                                   : log_factorial(n_atoms - k + 1) + log_factorial(k);
    return (n_atoms - 1) * std::log(2.0 * mu) - log_inv_normalization_Nk(n_atoms, k, mu) -
           log_inv_normalization_Nn_perp(n_atoms, n, mu) + fact;
}

/// Closed form for N = 1, k = 0, finite down to mu = 0.
inline double xi_single_particle_unchecked(double mu) {
    const double mu2 = mu * mu;
    const double den = 2.0 * mu2 * (1.0 + mu2) - (1.0 - mu2 * mu2) * (mu2 - 1.0) / 2.0;
    return std::abs(-4.0 / den);
}

}  // namespace detail

/// <psi_n^perp | d/dt psi_k> for n = k +- 1.
inline double derivative_overlap(int n_atoms, int k, int n, double mu, double mu_dot) {
    detail::check_neighbor(n_atoms, k, n, "derivative_overlap");
    detail::check_mu_regular(mu, "derivative_overlap");
    if (mu_dot == 0.0) return 0.0;
    return -mu_dot * std::exp(detail::log_jz_cross_over_mu(n_atoms, k, n, mu));
}

/// <psi_n^perp | Jz | psi_k> for n = k +- 1.
inline double jz_cross_element(int n_atoms, int k, int n, double mu) {
    detail::check_neighbor(n_atoms, k, n, "jz_cross_element");
    detail::check_mu_regular(mu, "jz_cross_element");
    return -mu * std::exp(detail::log_jz_cross_over_mu(n_atoms, k, n, mu));
}

/// <psi_n^perp | Jz | psi_n^perp> through the neighbouring complementary overlaps:
///   -(N_n/2) [ (N-n)/N_{n+1} <n|n+1> + n/N_{n-1} <n|n-1> ].
inline double jz_complementary_expectation(int n_atoms, int n, double mu) {
    detail::check_index(n_atoms, n, "jz_complementary_expectation");
    detail::check_mu_regular(mu, "jz_complementary_expectation");
    const auto dec = overlap_decomposition(mu);
    const double log_inv_n = log_inv_normalization_Nn_perp(n_atoms, n, mu);
    auto neighbour_term = [&](int other, double weight) {
        if (weight == 0.0) return 0.0;
        // N_n / N_other * <n|other> = N_n^2 * (unnormalized overlap sum)
        const auto [sign, log_sum] =
            detail::overlap_sum(n_atoms, std::min(n, other), std::max(n, other), mu, dec.b1, dec.b_perp);
        if (sign == 0) return 0.0;
        return weight * sign * std::exp(log_sum - 2.0 * log_inv_n);
    };
    double acc = 0.0;
    if (n + 1 <= n_atoms) acc += neighbour_term(n + 1, n_atoms - n);
    if (n - 1 >= 0) acc += neighbour_term(n - 1, n);
    return -0.5 * acc;
}

struct XiValue {
    double value = 0.0;
    int branch = 0;  // neighbour n attaining the max
};

inline XiValue xi_k(int n_atoms, int k, double mu) {
    detail::check_index(n_atoms, k, "xi_k");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("xi_k: mu must be finite and >= 0");
    if (mu < kXiMuMin) {
        if (n_atoms == 1) return {detail::xi_single_particle_unchecked(mu), 1 - k};
        throw SingularParameter("xi_k: mu below 1e-6 is singular for N > 1");
    }
    const double mu2 = mu * mu;
    XiValue best{-1.0, -1};
    for (int n : {k + 1, k - 1}) {
        if (n < 0 || n > n_atoms) continue;
        const double num_over_mu = 4.0 * std::exp(detail::log_jz_cross_over_mu(n_atoms, k, n, mu));
        const double den = 2.0 * mu2 + (1.0 - mu2 * mu2) * jz_complementary_expectation(n_atoms, n, mu);
        // |4 <Jz> / (mu den)| with the 1/mu already folded into num_over_mu.
        const double xi = std::abs(num_over_mu / den);
        if (xi > best.value) best = {xi, n};
    }
    return best;
}

/// xi_k at mu = 1.
inline double xi_kf(int n_atoms, int k) {
    detail::check_index(n_atoms, k, "xi_kf");
    const double n = n_atoms;
    if (2 * k < n_atoms) return std::sqrt((n - k) * (k + 1.0));
    return std::sqrt((n - k + 1.0) * k);
}

inline double Xi(double xi, double mu_dot, double gamma_c, double nu) {
    if (!(gamma_c > 0.0)) throw std::invalid_argument("Xi: gamma_c must be > 0");
    return mu_dot * xi / (gamma_c * std::sqrt(1.0 + nu * nu));
}

/// Closed form for one atom and k = 0 (the mu_dot / Gc sqrt(1+nu^2) factor lives in Xi).
inline double xi_single_particle(double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("xi_single_particle: mu must be > 0");
    return detail::xi_single_particle_unchecked(mu);
}

struct AdiabaticityReport {
    int n_atoms = 0;
    int k = 0;
    std::vector<double> mu_grid;
    std::vector<double> xi;
    std::vector<double> xi_ratio;
    std::vector<double> Xi;
    std::vector<int> branch;
};

inline AdiabaticityReport adiabaticity_scan(int n_atoms, int k, const std::vector<double>& mu_grid,
                                            double mu_dot = 0.0, double gamma_c = 1.0, double nu = 0.0) {
    if (mu_grid.empty()) throw std::invalid_argument("adiabaticity_scan: empty mu grid");
    AdiabaticityReport report;
    report.n_atoms = n_atoms;
    report.k = k;
    report.mu_grid = mu_grid;
    const double final_value = xi_kf(n_atoms, k);
    for (double mu : mu_grid) {
        const XiValue v = xi_k(n_atoms, k, mu);
        report.xi.push_back(v.value);
        report.xi_ratio.push_back(v.value / final_value);
        report.Xi.push_back(Xi(v.value, mu_dot, gamma_c, nu));
        report.branch.push_back(v.branch);
    }
    return report;
}

inline void write_adiabaticity_csv(std::ostream& out, const AdiabaticityReport& report) {
    out << "mu,xi,xi_over_xif,branch\n";
    for (std::size_t i = 0; i < report.mu_grid.size(); ++i)
        csv::write_row(out, report.mu_grid[i], report.xi[i], report.xi_ratio[i], report.branch[i]);
}

}  // namespace dfs
