#pragma once

// Laboratory cavity-QED parameters -> effective jump-operator parameters.
//   S1 = g|Omega1| / (2|Delta_l|),  S2 = g|Omega2| / (2|Delta_r|)
//   Gc = 2 kappa S1^2 / (Delta_c^2 + kappa^2)
//   mu = sqrt(S2/S1),  chi = eta/S1,  nu = Delta_c/kappa
// All inputs share one angular-frequency unit. Laser phases are rotated away,
// so only magnitudes enter.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfs/dfs_eigen.hpp"

namespace dfs {

struct PhysicalParams {
    double g = 0.0;
    double omega_1_abs = 0.0;
    double omega_2_abs = 0.0;
    double delta_l = 0.0;
    double delta_r = 0.0;
    double kappa = 0.0;
    double delta_c = 0.0;
    double eta = 0.0;
    int n_atoms = 1;
    // Both are eliminated by choice of frame; nonzero values are rejected.
    double delta_up = 0.0;
    double delta_d = 0.0;

    void validate() const {
        if (!(kappa > 0.0)) throw std::invalid_argument("PhysicalParams: kappa must be > 0");
        if (n_atoms < 1) throw std::invalid_argument("PhysicalParams: n_atoms must be >= 1");
        if (delta_l == 0.0) throw std::invalid_argument("PhysicalParams: delta_l must be nonzero");
        if (delta_r == 0.0 && omega_2_abs != 0.0)
            throw std::invalid_argument("PhysicalParams: delta_r must be nonzero unless Omega2 = 0");
        if (g < 0.0 || omega_1_abs < 0.0 || omega_2_abs < 0.0 || eta < 0.0)
            throw std::invalid_argument("PhysicalParams: g, |Omega1|, |Omega2| and eta must be >= 0");
        if (delta_up != 0.0 || delta_d != 0.0)
            throw std::invalid_argument("PhysicalParams: delta_up and delta_d must be 0 in the effective model");
    }

    double s1() const { return g * omega_1_abs / (2.0 * std::abs(delta_l)); }
    double s2() const { return omega_2_abs == 0.0 ? 0.0 : g * omega_2_abs / (2.0 * std::abs(delta_r)); }
};

inline JumpParams effective_params(const PhysicalParams& p) {
    p.validate();
    const double s1 = p.s1();
    if (!(s1 > 0.0)) throw std::invalid_argument("effective_params: S1 = 0 leaves mu and chi undefined");
    JumpParams out;
    out.gamma_c = 2.0 * p.kappa * s1 * s1 / (p.delta_c * p.delta_c + p.kappa * p.kappa);
    out.mu = std::sqrt(p.s2() / s1);
    out.chi = p.eta / s1;
    out.nu = p.delta_c / p.kappa;
    return out;
}

struct ValidityCheck {
    std::string condition;
    double ratio = 0.0;  // +inf when the small side vanishes
    bool pass = false;
};

inline constexpr double kValidityFactor = 10.0;

/// Regime assumptions behind the effective model, each as large/small >= 10.
/// Advisory only.
inline std::vector<ValidityCheck> validity_report(const PhysicalParams& p) {
    const double root_n = std::sqrt(static_cast<double>(std::max(p.n_atoms, 1)));
    auto check = [](std::string name, double large, double small) {
        const double ratio = small == 0.0 ? std::numeric_limits<double>::infinity() : std::abs(large) / small;
        return ValidityCheck{std::move(name), ratio, ratio >= kValidityFactor};
    };
    const double s1 = p.delta_l == 0.0 ? 0.0 : p.s1();
    const double s2 = p.delta_r == 0.0 ? 0.0 : p.s2();
    return {
        check("kappa >> sqrt(N) eta", p.kappa, root_n * p.eta),
        check("kappa >> sqrt(N) S1", p.kappa, root_n * s1),
        check("kappa >> sqrt(N) S2", p.kappa, root_n * s2),
        check("|Delta_l| >> Omega1", p.delta_l, p.omega_1_abs),
        check("|Delta_l| >> Omega2", p.delta_l, p.omega_2_abs),
        check("|Delta_l| >> sqrt(N) g", p.delta_l, root_n * p.g),
        check("|Delta_r| >> Omega1", p.delta_r, p.omega_1_abs),
        check("|Delta_r| >> Omega2", p.delta_r, p.omega_2_abs),
        check("|Delta_r| >> sqrt(N) g", p.delta_r, root_n * p.g),
    };
}

}  // namespace dfs
