#pragma once

// Analytic eigenstructure of the collective jump operator
//   L = sqrt(Gc) (J- + mu^2 J+ + chi I)
// in the Schwinger-boson picture. With x = b_up^+, y = b_down^+:
//   eigenstates      psi_k     ~ (mu x + y)^(N-k) (-mu x + y)^k |0>
//   complementary    psi_n^perp ~ (x + mu y)^(N-n) (-x + mu y)^n |0>
// The complementary states are right eigenvectors of L^+ and biorthogonal to
// the psi_k. Every ket is phased so that its m = -N/2 amplitude is real and
// nonnegative.
//
// Normalizations and overlaps are closed-form double-binomial sums evaluated in
// log space. For mu <= 1 every term in each sum has the same sign, so the
// log-sum-exp is unconditionally stable.

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "dfs/dicke.hpp"
#include "dfs/errors.hpp"
#include "dfs/log_math.hpp"

namespace dfs {

/// Below this the complementary construction (which divides by 2 mu) is refused.
inline constexpr double kMuMin = 1e-9;

struct JumpParams {
    double gamma_c = 1.0;
    double mu = 0.0;
    double chi = 0.0;
    double nu = 0.0;

    void validate() const {
        if (!(gamma_c > 0.0) || !std::isfinite(gamma_c))
            throw std::invalid_argument("JumpParams: gamma_c must be positive and finite");
        if (!(mu >= 0.0) || !std::isfinite(mu))
            throw std::invalid_argument("JumpParams: mu must be finite and >= 0");
        if (!std::isfinite(chi) || !std::isfinite(nu))
            throw std::invalid_argument("JumpParams: chi and nu must be finite");
    }
};

struct EigenstateSpec {
    int n_atoms = 1;
    int k = 0;
    double mu = 0.0;
};

/// Coefficients of c2^+ = a1 c1^+ + a_perp c_perp^+ and d2^+ = b1 d1^+ + b_perp d_perp^+.
struct OverlapDecomposition {
    double a1 = 0.0;
    double a_perp = 0.0;
    double b1 = 0.0;
    double b_perp = 0.0;
};

inline OverlapDecomposition overlap_decomposition(double mu) {
    const double mu2 = mu * mu;
    return {(1.0 - mu2) / (1.0 + mu2), -2.0 * mu / (1.0 + mu2), (mu2 - 1.0) / (mu2 + 1.0),
            -2.0 * mu / (mu2 + 1.0)};
}

namespace detail {

inline void check_index(int n_atoms, int k, const char* who) {
    if (n_atoms < 1) throw std::invalid_argument(std::string(who) + ": n_atoms must be >= 1");
    if (k < 0 || k > n_atoms) throw std::invalid_argument(std::string(who) + ": index outside [0, N]");
}

inline void check_mu_nonnegative(double mu, const char* who) {
    if (!(mu >= 0.0) || !std::isfinite(mu))
        throw std::invalid_argument(std::string(who) + ": mu must be finite and >= 0");
}

inline void check_mu_regular(double mu, const char* who) {
    check_mu_nonnegative(mu, who);
    if (mu <= kMuMin)
        throw SingularParameter(std::string(who) + ": mu too close to 0, complementary basis is singular");
}

/// One single-particle mode (up_coef * x + down_coef * y).
struct Mode {
    long double up_coef;
    long double down_coef;
};

/// Normalized Dicke vector of first^count_first * second^count_second |0>.
/// Factors are applied one atom at a time in the normalized Dicke basis with a
/// renormalization after each step, interleaving the two modes so no single
/// step suffers a large norm collapse.
inline Eigen::VectorXcd symmetric_product(Mode first, int count_first, Mode second, int count_second) {
    using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const int total = count_first + count_second;
    Vec v(1);
    v(0) = 1.0L;
    int used_first = 0;
    int used_second = 0;
    for (int atoms = 0; atoms < total; ++atoms) {
        // Bresenham-style interleave keeps used_first/used_second proportional.
        const bool take_first =
            used_second >= count_second ||
            (used_first < count_first &&
             static_cast<long long>(used_first) * total <= static_cast<long long>(atoms) * count_first);
        const Mode mode = take_first ? first : second;
        (take_first ? used_first : used_second)++;

        Vec next = Vec::Zero(atoms + 2);
        for (int i = 0; i <= atoms + 1; ++i) {
            long double acc = 0.0L;
            if (i >= 1) acc += mode.up_coef * std::sqrt(static_cast<long double>(i)) * v(i - 1);
            if (i <= atoms) acc += mode.down_coef * std::sqrt(static_cast<long double>(atoms + 1 - i)) * v(i);
            next(i) = acc;
        }
        const long double norm = next.norm();
        if (norm == 0.0L) throw std::runtime_error("symmetric_product: state vanished");
        v = next / norm;
    }
    Eigen::VectorXcd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out(i) = static_cast<double>(v(i));
    return out;
}

inline void fix_phase(Eigen::VectorXcd& amps) {
    // Lowest-m amplitude real and nonnegative.
    const double mag = std::abs(amps(0));
    if (mag > 0.0) amps *= std::conj(amps(0)) / mag;
}

}  // namespace detail

/// Dark-state drive: chi = -mu (N - 2k) zeroes the k-th eigenvalue.
inline double chi_for_dark(int n_atoms, int k, double mu) { return mu * (2 * k - n_atoms); }

/// Eigenvalue of J- + mu^2 J+ + chi on psi_k (Gc factored out).
inline double jump_eigenvalue(int n_atoms, int k, double mu, double chi) {
    return mu * (n_atoms - 2 * k) + chi;
}

inline DickeKet eigenstate(const EigenstateSpec& spec) {
    detail::check_index(spec.n_atoms, spec.k, "eigenstate");
    if (spec.mu < 0.0 || !std::isfinite(spec.mu))
        throw std::invalid_argument("eigenstate: mu must be finite and >= 0");
    if (spec.mu == 0.0) return ground_state(spec.n_atoms);
    const long double mu = spec.mu;
    Eigen::VectorXcd amps =
        detail::symmetric_product({mu, 1.0L}, spec.n_atoms - spec.k, {-mu, 1.0L}, spec.k);
    detail::fix_phase(amps);
    return {spec.n_atoms, std::move(amps)};
}

inline DickeKet eigenstate(int n_atoms, int k, double mu) { return eigenstate(EigenstateSpec{n_atoms, k, mu}); }

inline DickeKet complementary_state(int n_atoms, int n, double mu) {
    detail::check_index(n_atoms, n, "complementary_state");
    detail::check_mu_regular(mu, "complementary_state");
    const long double m = mu;
    Eigen::VectorXcd amps = detail::symmetric_product({1.0L, m}, n_atoms - n, {-1.0L, m}, n);
    detail::fix_phase(amps);
    return {n_atoms, std::move(amps)};
}

/// log(1 / N_k). Uses 0^0 = 1 so the sum is continuous through mu = 1.
inline double log_inv_normalization_Nk(int n_atoms, int k, double mu) {
    detail::check_index(n_atoms, k, "normalization_Nk");
    detail::check_mu_nonnegative(mu, "normalization_Nk");
    using namespace logmath;
    const double mu2 = mu * mu;
    LogSum sum;
    for (int i = 0; i <= k; ++i) {
        sum.add(log_binomial(k, i) + log_factorial(k) + log_factorial(n_atoms - k + i) +
                log_pow(1.0 - mu2, 2 * i) + log_pow(4.0 * mu2, k - i) - log_factorial(i));
    }
    return 0.5 * (sum.value() - (2 * k - n_atoms) * std::log1p(mu2));
}

inline double normalization_Nk(int n_atoms, int k, double mu) {
    return std::exp(-log_inv_normalization_Nk(n_atoms, k, mu));
}

/// log(1 / N_n^perp).
inline double log_inv_normalization_Nn_perp(int n_atoms, int n, double mu) {
    detail::check_index(n_atoms, n, "normalization_Nn_perp");
    detail::check_mu_regular(mu, "normalization_Nn_perp");
    using namespace logmath;
    const double mu2 = mu * mu;
    LogSum sum;
    for (int i = 0; i <= n; ++i) {
        sum.add(log_binomial(n, i) + log_factorial(n) + log_factorial(n_atoms - n + i) +
                log_pow(mu2 - 1.0, 2 * i) + log_pow(4.0 * mu2, n - i) - log_factorial(i));
    }
    return 0.5 * (sum.value() - (2 * n - n_atoms) * std::log1p(mu2));
}

inline double normalization_Nn_perp(int n_atoms, int n, double mu) {
    return std::exp(-log_inv_normalization_Nn_perp(n_atoms, n, mu));
}

namespace detail {

/// Shared double-binomial overlap sum for lo <= hi:
///   (1+mu^2)^N sum_i C(lo,i) C(hi,hi-lo+i) |p1|^{2i} p1^{hi-lo} |pp|^{2(lo-i)} (N-lo+i)! (lo-i)!
/// returned as (sign, log magnitude), without the normalization prefactors.
inline std::pair<int, double> overlap_sum(int n_atoms, int lo, int hi, double mu, double p1, double pp) {
    using namespace logmath;
    const int gap = hi - lo;
    int sign = 1;
    if (gap > 0) {
        if (p1 == 0.0) return {0, kNegInf};
        if (p1 < 0.0 && gap % 2 == 1) sign = -1;
    }
    LogSum sum;
    for (int i = 0; i <= lo; ++i) {
        sum.add(log_binomial(lo, i) + log_binomial(hi, gap + i) + log_pow(p1, 2 * i) + log_pow(p1, gap) +
                log_pow(pp, 2 * (lo - i)) + log_factorial(n_atoms - lo + i) + log_factorial(lo - i));
    }
    const double value = sum.value();
    if (value == kNegInf) return {0, kNegInf};
    return {sign, value + n_atoms * std::log1p(mu * mu)};
}

}  // namespace detail

/// <psi_{k'} | psi_k>. Real under the phase convention, so the order of the
/// indices does not matter.
inline double eigenstate_overlap(int n_atoms, int k_prime, int k, double mu) {
    detail::check_index(n_atoms, k_prime, "eigenstate_overlap");
    detail::check_index(n_atoms, k, "eigenstate_overlap");
    detail::check_mu_nonnegative(mu, "eigenstate_overlap");
    if (k_prime == k) return 1.0;
    const int lo = std::min(k_prime, k);
    const int hi = std::max(k_prime, k);
    const auto dec = overlap_decomposition(mu);
    const auto [sign, log_sum] = detail::overlap_sum(n_atoms, lo, hi, mu, dec.a1, dec.a_perp);
    if (sign == 0) return 0.0;
    return sign * std::exp(log_sum - log_inv_normalization_Nk(n_atoms, lo, mu) -
                           log_inv_normalization_Nk(n_atoms, hi, mu));
}

/// <psi_{n'}^perp | psi_n^perp>.
inline double complementary_overlap(int n_atoms, int n_prime, int n, double mu) {
    detail::check_index(n_atoms, n_prime, "complementary_overlap");
    detail::check_index(n_atoms, n, "complementary_overlap");
    detail::check_mu_regular(mu, "complementary_overlap");
    if (n_prime == n) return 1.0;
    const int lo = std::min(n_prime, n);
    const int hi = std::max(n_prime, n);
    const auto dec = overlap_decomposition(mu);
    const auto [sign, log_sum] = detail::overlap_sum(n_atoms, lo, hi, mu, dec.b1, dec.b_perp);
    if (sign == 0) return 0.0;
    return sign * std::exp(log_sum - log_inv_normalization_Nn_perp(n_atoms, lo, mu) -
                           log_inv_normalization_Nn_perp(n_atoms, hi, mu));
}

/// log <psi_k^perp | psi_k> = log[(2 mu)^N N_k N_k^perp (N-k)! k!].
inline double log_cross_overlap_diagonal(int n_atoms, int k, double mu) {
    detail::check_index(n_atoms, k, "cross_overlap");
    detail::check_mu_regular(mu, "cross_overlap");
    using namespace logmath;
    return n_atoms * std::log(2.0 * mu) - log_inv_normalization_Nk(n_atoms, k, mu) -
           log_inv_normalization_Nn_perp(n_atoms, k, mu) + log_factorial(n_atoms - k) + log_factorial(k);
}

/// <psi_n^perp | psi_k>: zero off the diagonal (biorthogonality).
inline double cross_overlap(int n_atoms, int n, int k, double mu) {
    detail::check_index(n_atoms, n, "cross_overlap");
    detail::check_index(n_atoms, k, "cross_overlap");
    detail::check_mu_regular(mu, "cross_overlap");
    if (n != k) return 0.0;
    return std::exp(log_cross_overlap_diagonal(n_atoms, k, mu));
}

}  // namespace dfs
