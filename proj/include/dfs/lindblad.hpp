#pragma once

// Effective master equation of the collective spin in the Dicke manifold,
//   d rho/dt = -i [H, rho] + L rho L^+ - 1/2 {L^+ L, rho},
//   L = sqrt(Gc)(J- + mu^2 J+ + chi I),  H = (nu/2) L^+ L,
// integrated with fixed-step classical RK4. hbar = 1 and time is in 1/Gc.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dfs/csv.hpp"
#include "dfs/dfs_eigen.hpp"
#include "dfs/dicke.hpp"
#include "dfs/errors.hpp"
#include "dfs/schedules.hpp"

namespace dfs {

struct DensityMatrix {
    int n_atoms = 0;
    Eigen::MatrixXcd rho;

    static DensityMatrix pure(const DickeKet& ket) {
        return {ket.n_atoms, ket.amplitudes * ket.amplitudes.adjoint()};
    }

    double trace_drift() const { return std::abs(rho.trace() - cplx(1.0)); }
    double hermiticity_error() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }
    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho, Eigen::EigenvaluesOnly);
        return solver.eigenvalues().minCoeff();
    }
};

struct IntegratorConfig {
    double dt = 0.0;  // <= 0 selects the default step
    std::size_t max_steps = 100'000'000;
    double trace_tolerance = 1e-8;
    bool convergence_check = false;
};

inline constexpr double kConvergenceTolerance = 1e-6;

/// Default RK4 step. Dissipator rates reach about 2 N^2 Gc at mu = 1 and RK4 is
/// only stable for |lambda dt| < 2.78, so the step shrinks as 1/N^2.
inline double default_dt(int n_atoms, double gamma_c, double nu = 0.0) {
    const double n = static_cast<double>(n_atoms);
    return std::min(1e-3, 1.0 / (2.0 * n * n * std::sqrt(1.0 + nu * nu))) / gamma_c;
}

struct ObservableSample {
    double t = 0.0;
    double mu = 0.0;
    double chi = 0.0;
    double purity = 1.0;
    double fidelity = 1.0;
    std::optional<double> xi_k;
    std::optional<double> Xi_k;
};

/// Dense L = sqrt(Gc)(J- + mu^2 J+ + chi I).
inline Eigen::MatrixXcd assemble_jump(const CollectiveOps& ops, const JumpParams& params) {
    params.validate();
    const Eigen::MatrixXd l =
        std::sqrt(params.gamma_c) * (ops.j_minus + params.mu * params.mu * ops.j_plus + params.chi * ops.identity);
    return l.cast<cplx>();
}

inline Eigen::MatrixXcd effective_hamiltonian(const Eigen::MatrixXcd& jump, double nu) {
    if (jump.rows() != jump.cols()) throw std::invalid_argument("effective_hamiltonian: L must be square");
    return 0.5 * nu * (jump.adjoint() * jump);
}

inline Eigen::MatrixXcd lindblad_rhs(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& hamiltonian,
                                     const Eigen::MatrixXcd& jump) {
    if (rho.rows() != rho.cols() || hamiltonian.rows() != rho.rows() || hamiltonian.cols() != rho.cols() ||
        jump.rows() != rho.rows() || jump.cols() != rho.cols())
        throw std::invalid_argument("lindblad_rhs: dimension mismatch");
    const cplx i_unit(0.0, 1.0);
    const Eigen::MatrixXcd ldl = jump.adjoint() * jump;
    return -i_unit * (hamiltonian * rho - rho * hamiltonian) + jump * rho * jump.adjoint() -
           0.5 * (ldl * rho + rho * ldl);
}

inline Eigen::MatrixXcd lindblad_rhs(const DensityMatrix& rho, const Eigen::MatrixXcd& hamiltonian,
                                     const Eigen::MatrixXcd& jump) {
    return lindblad_rhs(rho.rho, hamiltonian, jump);
}

inline double purity(const DensityMatrix& rho) {
    // Tr[rho^2] = sum |rho_ij|^2 for Hermitian rho.
    return rho.rho.cwiseAbs2().sum();
}

/// <psi|rho|psi>, which equals the Uhlmann-Jozsa fidelity for a pure target.
inline double fidelity(const DensityMatrix& rho, const DickeKet& psi) {
    if (!psi.is_normalized(1e-10)) throw std::invalid_argument("fidelity: target state is not normalized");
    if (psi.dim() != rho.rho.rows()) throw std::invalid_argument("fidelity: dimension mismatch");
    return std::real(psi.amplitudes.dot(rho.rho * psi.amplitudes));
}

namespace detail {

/// Tridiagonal real jump operator acting on a density matrix stored in Scalar
/// precision. Scalar = double is exact whenever nu = 0 and rho is real.
template <typename Scalar>
class BandedLindblad {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    BandedLindblad(const CollectiveOps& ops, double gamma_c, double nu)
        : n_(ops.dim()), sqrt_gamma_(std::sqrt(gamma_c)), nu_(nu) {
        ladder_.resize(n_ - 1);
        for (Eigen::Index i = 0; i + 1 < n_; ++i) ladder_(i) = ops.j_plus(i + 1, i);
        diag_.resize(n_);
        upper_.resize(n_ - 1);
        lower_.resize(n_ - 1);
        x_.resize(n_, n_);
        z_.resize(n_, n_);
        w_.resize(n_, n_);
    }

    void set_drive(double mu, double chi) {
        diag_.setConstant(sqrt_gamma_ * chi);
        upper_ = sqrt_gamma_ * ladder_;            // L(i, i+1) from J-
        lower_ = (sqrt_gamma_ * mu * mu) * ladder_;  // L(i+1, i) from mu^2 J+
    }

    /// out = L rho L^T - c L^T L rho - conj(c) rho L^T L,  c = 1/2 + i nu/2.
    void rhs(const Matrix& rho, Matrix& out) {
        left(rho, x_);               // L rho
        right_transposed(x_, out);   // L rho L^T
        left_transposed(x_, z_);     // L^T L rho
        right_transposed(rho, x_);   // rho L^T
        right(x_, w_);               // rho L^T L
        if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
            out -= Scalar(0.5, 0.5 * nu_) * z_ + Scalar(0.5, -0.5 * nu_) * w_;
        } else {
            out -= 0.5 * (z_ + w_);
        }
    }

private:
    void left(const Matrix& in, Matrix& res) const {
        const Eigen::Index m = n_ - 1;
        res.noalias() = diag_.asDiagonal() * in;
        res.topRows(m).noalias() += upper_.asDiagonal() * in.bottomRows(m);
        res.bottomRows(m).noalias() += lower_.asDiagonal() * in.topRows(m);
    }
    void left_transposed(const Matrix& in, Matrix& res) const {
        const Eigen::Index m = n_ - 1;
        res.noalias() = diag_.asDiagonal() * in;
        res.topRows(m).noalias() += lower_.asDiagonal() * in.bottomRows(m);
        res.bottomRows(m).noalias() += upper_.asDiagonal() * in.topRows(m);
    }
    void right(const Matrix& in, Matrix& res) const {
        const Eigen::Index m = n_ - 1;
        res.noalias() = in * diag_.asDiagonal();
        res.rightCols(m).noalias() += in.leftCols(m) * upper_.asDiagonal();
        res.leftCols(m).noalias() += in.rightCols(m) * lower_.asDiagonal();
    }
    void right_transposed(const Matrix& in, Matrix& res) const {
        const Eigen::Index m = n_ - 1;
        res.noalias() = in * diag_.asDiagonal();
        res.leftCols(m).noalias() += in.rightCols(m) * upper_.asDiagonal();
        res.rightCols(m).noalias() += in.leftCols(m) * lower_.asDiagonal();
    }

    Eigen::Index n_;
    double sqrt_gamma_;
    double nu_;
    Eigen::VectorXd ladder_, diag_, upper_, lower_;
    Matrix x_, z_, w_;
};

}  // namespace detail

struct EvolutionResult {
    std::vector<ObservableSample> samples;
    DensityMatrix final_state;
    double dt_used = 0.0;
    std::size_t steps = 0;
    double max_trace_drift = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
    std::size_t symmetrizations = 0;
    // Filled only when IntegratorConfig::convergence_check is set.
    std::optional<double> half_step_fidelity_gap;
    bool converged = true;

    double final_fidelity() const { return samples.back().fidelity; }
    double final_purity() const { return samples.back().purity; }
};

namespace detail {

template <typename Scalar>
struct Rk4Workspace {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    explicit Rk4Workspace(Eigen::Index n) : k1(n, n), k2(n, n), k3(n, n), k4(n, n), stage(n, n) {}
    Matrix k1, k2, k3, k4, stage;
};

/// One classical RK4 step; `drive(t)` sets the engine's mu and chi for time t.
template <typename Scalar, typename Drive>
void rk4_advance(BandedLindblad<Scalar>& engine, Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& rho,
                 double t, double dt, Drive&& drive, Rk4Workspace<Scalar>& w) {
    drive(t);
    engine.rhs(rho, w.k1);
    drive(t + 0.5 * dt);
    w.stage = rho + (0.5 * dt) * w.k1;
    engine.rhs(w.stage, w.k2);
    w.stage = rho + (0.5 * dt) * w.k2;
    engine.rhs(w.stage, w.k3);
    drive(t + dt);
    w.stage = rho + dt * w.k3;
    engine.rhs(w.stage, w.k4);
    rho += (dt / 6.0) * (w.k1 + 2.0 * w.k2 + 2.0 * w.k3 + w.k4);
}

template <typename Scalar>
EvolutionResult evolve_fixed_step(const DensityMatrix& rho0, const Schedule& schedule, const JumpParams& base,
                                  const IntegratorConfig& cfg, std::size_t sample_every) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const int n_atoms = rho0.n_atoms;
    const CollectiveOps ops = build_collective_ops(n_atoms);
    BandedLindblad<Scalar> engine(ops, base.gamma_c, base.nu);

    const double dt_request = cfg.dt > 0.0 ? cfg.dt : default_dt(n_atoms, base.gamma_c, base.nu);
    const auto steps = static_cast<std::size_t>(std::ceil(schedule.t_f / dt_request - 1e-9));
    if (steps == 0) throw std::invalid_argument("evolve: horizon shorter than one step");
    if (steps > cfg.max_steps) throw std::invalid_argument("evolve: step budget exceeded (max_steps)");
    const double dt = schedule.t_f / static_cast<double>(steps);

    Matrix rho;
    if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
        rho = rho0.rho;
    } else {
        rho = rho0.rho.real();
    }
    Rk4Workspace<Scalar> work(rho.rows());

    EvolutionResult result;
    result.dt_used = dt;
    result.steps = steps;
    result.min_eigenvalue = 1.0;

    auto record = [&](std::size_t step, double t) {
        DensityMatrix current{n_atoms, rho.template cast<cplx>()};
        const double herm = current.hermiticity_error();
        result.max_hermiticity_error = std::max(result.max_hermiticity_error, herm);
        if (herm > 1e-12) {
            rho = (0.5 * (rho + rho.adjoint())).eval();
            current.rho = rho.template cast<cplx>();
            ++result.symmetrizations;
        }
        const double drift = current.trace_drift();
        result.max_trace_drift = std::max(result.max_trace_drift, drift);
        if (!(drift <= cfg.trace_tolerance))
            throw IntegrationDiverged("evolve: trace drift " + std::to_string(drift) + " exceeds tolerance at step " +
                                          std::to_string(step),
                                      step, t);
        result.min_eigenvalue = std::min(result.min_eigenvalue, current.min_eigenvalue());

        ObservableSample s;
        s.t = t;
        s.mu = schedule.mu(t);
        s.chi = chi_for_dark(n_atoms, schedule.k, s.mu);
        s.purity = purity(current);
        s.fidelity = fidelity(current, eigenstate(n_atoms, schedule.k, s.mu));
        result.samples.push_back(s);
    };

    auto drive = [&](double t) {
        const double mu = schedule.mu(t);
        engine.set_drive(mu, chi_for_dark(n_atoms, schedule.k, mu));
    };

    sample_every = std::max<std::size_t>(1, sample_every);
    record(0, 0.0);
    for (std::size_t step = 1; step <= steps; ++step) {
        rk4_advance(engine, rho, (step - 1) * dt, dt, drive, work);
        if (step % sample_every == 0 || step == steps) record(step, step == steps ? schedule.t_f : step * dt);
    }
    result.final_state = DensityMatrix{n_atoms, rho.template cast<cplx>()};
    return result;
}

}  // namespace detail

/// Integrates rho0 along the schedule with chi(t) held on the dark-state
/// condition for the schedule's target k. `base` supplies Gc and nu; its mu and
/// chi are ignored. Samples are taken at t = 0, every `sample_every` steps and
/// at t_f, with fidelity measured against the instantaneous psi_k(mu(t)).
inline EvolutionResult evolve(const DensityMatrix& rho0, const Schedule& schedule, const JumpParams& base,
                              const IntegratorConfig& cfg = {}, std::size_t sample_every = 100) {
    base.validate();
    if (rho0.n_atoms != schedule.n_atoms || rho0.rho.rows() != schedule.n_atoms + 1 ||
        rho0.rho.cols() != schedule.n_atoms + 1)
        throw std::invalid_argument("evolve: initial state does not match the schedule's atom number");
    if (!(schedule.t_f > 0.0)) throw std::invalid_argument("evolve: schedule horizon must be > 0");
    if (rho0.trace_drift() > 1e-8 || rho0.hermiticity_error() > 1e-10 || rho0.min_eigenvalue() < -1e-8)
        throw std::invalid_argument("evolve: initial density matrix is not a valid state");

    const bool real_path = base.nu == 0.0 && rho0.rho.imag().cwiseAbs().maxCoeff() == 0.0;
    auto run = [&](const IntegratorConfig& c) {
        return real_path ? detail::evolve_fixed_step<double>(rho0, schedule, base, c, sample_every)
                         : detail::evolve_fixed_step<cplx>(rho0, schedule, base, c, sample_every);
    };

    EvolutionResult result = run(cfg);
    if (cfg.convergence_check) {
        IntegratorConfig half = cfg;
        half.dt = 0.5 * result.dt_used;
        half.convergence_check = false;
        const EvolutionResult fine = run(half);
        result.half_step_fidelity_gap = std::abs(fine.final_fidelity() - result.final_fidelity());
        result.converged = *result.half_step_fidelity_gap <= kConvergenceTolerance;
    }
    return result;
}

/// One RK4 step of length dt with mu, chi and nu held at `params`.
inline DensityMatrix rk4_step(const DensityMatrix& rho, const JumpParams& params, double dt) {
    params.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be > 0");
    if (rho.rho.rows() != rho.n_atoms + 1 || rho.rho.cols() != rho.n_atoms + 1)
        throw std::invalid_argument("rk4_step: density matrix does not match its atom number");
    const CollectiveOps ops = build_collective_ops(rho.n_atoms);
    detail::BandedLindblad<cplx> engine(ops, params.gamma_c, params.nu);
    engine.set_drive(params.mu, params.chi);
    detail::Rk4Workspace<cplx> work(rho.rho.rows());
    Eigen::MatrixXcd next = rho.rho;
    detail::rk4_advance(engine, next, 0.0, dt, [](double) {}, work);
    return {rho.n_atoms, next};
}

inline void write_trajectory_csv(std::ostream& out, const std::vector<ObservableSample>& samples) {
    out << "t,mu,chi,purity,fidelity,xi_k,Xi_k\n";
    for (const auto& s : samples) csv::write_row(out, s.t, s.mu, s.chi, s.purity, s.fidelity, s.xi_k, s.Xi_k);
}

}  // namespace dfs
