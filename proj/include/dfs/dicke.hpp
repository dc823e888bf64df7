#pragma once

// Symmetric Dicke manifold of N two-level atoms.
//
// Basis ordering is ascending m everywhere in this library: index i holds
// |J = N/2, m = -N/2 + i>, i.e. i atoms in the up state.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "dfs/csv.hpp"
#include "dfs/log_math.hpp"

namespace dfs {

using cplx = std::complex<double>;

inline constexpr double kNormTolerance = 1e-12;

struct DickeKet {
    int n_atoms = 0;
    Eigen::VectorXcd amplitudes;

    DickeKet() = default;
    DickeKet(int n, Eigen::VectorXcd amps) : n_atoms(n), amplitudes(std::move(amps)) {
        if (n < 1) throw std::invalid_argument("DickeKet: n_atoms must be >= 1");
        if (amplitudes.size() != n + 1)
            throw std::invalid_argument("DickeKet: amplitude vector must have length N+1");
    }

    Eigen::Index dim() const { return amplitudes.size(); }
    double norm() const { return amplitudes.norm(); }
    bool is_normalized(double tol = kNormTolerance) const { return std::abs(norm() - 1.0) <= tol; }
    double m_of(Eigen::Index i) const { return -0.5 * n_atoms + static_cast<double>(i); }
};

/// Ket with all atoms down (m = -N/2).
inline DickeKet ground_state(int n_atoms) {
    if (n_atoms < 1) throw std::invalid_argument("ground_state: n_atoms must be >= 1");
    Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(n_atoms + 1);
    amps(0) = 1.0;
    return {n_atoms, std::move(amps)};
}

struct CollectiveOps {
    int n_atoms = 0;
    Eigen::MatrixXd j_plus;
    Eigen::MatrixXd j_minus;
    Eigen::MatrixXd j_z;
    Eigen::MatrixXd identity;

    Eigen::Index dim() const { return j_z.rows(); }
    Eigen::MatrixXd j_x() const { return 0.5 * (j_plus + j_minus); }
};

/// Ladder elements <m+1|J+|m> = sqrt(J(J+1) - m(m+1)) with J = N/2.
inline CollectiveOps build_collective_ops(int n_atoms) {
    if (n_atoms < 1) throw std::invalid_argument("build_collective_ops: n_atoms must be >= 1");
    const Eigen::Index dim = n_atoms + 1;
    const double j = 0.5 * n_atoms;
    CollectiveOps ops;
    ops.n_atoms = n_atoms;
    ops.j_plus = Eigen::MatrixXd::Zero(dim, dim);
    ops.j_z = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double m = -j + static_cast<double>(i);
        ops.j_z(i, i) = m;
        if (i + 1 < dim) ops.j_plus(i + 1, i) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
    }
    ops.j_minus = ops.j_plus.transpose();
    ops.identity = Eigen::MatrixXd::Identity(dim, dim);
    return ops;
}

struct SpinCoherentParams {
    double theta = 0.0;  // polar angle, [0, pi]
    double phi = 0.0;    // azimuth, [0, 2pi)
};

/// |theta, phi> = (cos(theta/2) b_up^+ + sin(theta/2) e^{i phi} b_down^+)^N |0> / sqrt(N!).
/// Binomial weights are taken in log space so large N does not overflow.
inline DickeKet spin_coherent_state(int n_atoms, SpinCoherentParams p) {
    if (n_atoms < 1) throw std::invalid_argument("spin_coherent_state: n_atoms must be >= 1");
    if (!(p.theta >= 0.0 && p.theta <= std::numbers::pi))
        throw std::invalid_argument("spin_coherent_state: theta outside [0, pi]");
    if (!(p.phi >= 0.0 && p.phi < 2.0 * std::numbers::pi))
        throw std::invalid_argument("spin_coherent_state: phi outside [0, 2pi)");

    const double c = std::cos(0.5 * p.theta);
    const double s = std::sin(0.5 * p.theta);
    Eigen::VectorXcd amps(n_atoms + 1);
    for (int i = 0; i <= n_atoms; ++i) {
        const int down = n_atoms - i;
        const double log_mag = 0.5 * logmath::log_binomial(n_atoms, i) + logmath::log_pow(c, i) +
                               logmath::log_pow(s, down);
        const double mag = log_mag == logmath::kNegInf ? 0.0 : std::exp(log_mag);
        // cos(theta/2) >= 0 on [0, pi]; sin(theta/2) >= 0 as well.
        amps(i) = std::polar(mag, down * p.phi);
    }
    return {n_atoms, std::move(amps)};
}

/// |<theta, phi|psi>|^2 sampled on a theta x phi grid.
struct BlochMap {
    Eigen::VectorXd theta;   // inclusive of 0 and pi
    Eigen::VectorXd phi;     // half-open [0, 2pi)
    Eigen::MatrixXd overlap; // rows: theta, cols: phi
};

namespace detail {
template <typename Overlap>
BlochMap sample_bloch_grid(int n_atoms, int theta_steps, int phi_steps, Overlap&& overlap) {
    if (theta_steps < 2 || phi_steps < 2)
        throw std::invalid_argument("bloch_overlap_map: need at least 2 steps per axis");
    BlochMap map;
    map.theta = Eigen::VectorXd::LinSpaced(theta_steps, 0.0, std::numbers::pi);
    map.phi.resize(phi_steps);
    for (int j = 0; j < phi_steps; ++j) map.phi(j) = 2.0 * std::numbers::pi * j / phi_steps;
    map.overlap.resize(theta_steps, phi_steps);
    for (int a = 0; a < theta_steps; ++a) {
        for (int b = 0; b < phi_steps; ++b) {
            const DickeKet coherent =
                spin_coherent_state(n_atoms, {std::min(map.theta(a), std::numbers::pi), map.phi(b)});
            map.overlap(a, b) = std::clamp(overlap(coherent.amplitudes), 0.0, 1.0);
        }
    }
    return map;
}
}  // namespace detail

inline BlochMap bloch_overlap_map(const DickeKet& state, int theta_steps, int phi_steps) {
    if (!state.is_normalized(1e-10))
        throw std::invalid_argument("bloch_overlap_map: state is not normalized");
    return detail::sample_bloch_grid(state.n_atoms, theta_steps, phi_steps, [&](const Eigen::VectorXcd& c) {
        return std::norm(c.dot(state.amplitudes));
    });
}

/// <theta, phi| rho |theta, phi> for a density matrix in the Dicke basis.
inline BlochMap bloch_overlap_map(const Eigen::MatrixXcd& rho, int theta_steps, int phi_steps) {
    if (rho.rows() < 2 || rho.rows() != rho.cols())
        throw std::invalid_argument("bloch_overlap_map: density matrix must be square with dimension >= 2");
    if (std::abs(rho.trace() - cplx(1.0)) > 1e-8)
        throw std::invalid_argument("bloch_overlap_map: density matrix must have unit trace");
    const int n_atoms = static_cast<int>(rho.rows()) - 1;
    return detail::sample_bloch_grid(n_atoms, theta_steps, phi_steps, [&](const Eigen::VectorXcd& c) {
        return std::real(c.dot(rho * c));
    });
}

inline void write_bloch_map_csv(std::ostream& out, const BlochMap& map) {
    out << "theta,phi,overlap\n";
    for (Eigen::Index a = 0; a < map.theta.size(); ++a)
        for (Eigen::Index b = 0; b < map.phi.size(); ++b)
            csv::write_row(out, map.theta(a), map.phi(b), map.overlap(a, b));
}

}  // namespace dfs
