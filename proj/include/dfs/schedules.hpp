#pragma once

// Drive profiles mu(t) and the dark-state drive chi(t) = -mu(t)(N - 2k).
// Time is measured in units of 1/Gc. Before t = 0 the drives are off.

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <future>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfs/csv.hpp"
#include "dfs/dfs_eigen.hpp"

namespace dfs {

enum class ScheduleKind { Linear, Quench, Piecewise };

inline std::string to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::Linear: return "linear";
        case ScheduleKind::Quench: return "quench";
        case ScheduleKind::Piecewise: return "piecewise";
    }
    return "unknown";
}

struct Breakpoint {
    double t = 0.0;
    double mu = 0.0;
};

struct Schedule {
    ScheduleKind kind = ScheduleKind::Linear;
    double t_f = 1.0;
    int k = 0;
    int n_atoms = 1;
    double beta = 0.0;    // slope of mu(t) (linear: 1/t_f, quench: q/(t_f N))
    double q = 0.0;       // quench strength
    double offset = 0.0;  // mu(0+) = C for the quench, 0 otherwise
    std::vector<Breakpoint> breakpoints;

    double mu(double t) const {
        if (t < 0.0) return 0.0;
        if (t >= t_f) return kind == ScheduleKind::Piecewise ? breakpoints.back().mu : 1.0;
        switch (kind) {
            case ScheduleKind::Linear:
            case ScheduleKind::Quench: return offset + beta * t;
            case ScheduleKind::Piecewise: {
                auto upper = std::upper_bound(breakpoints.begin(), breakpoints.end(), t,
                                              [](double v, const Breakpoint& b) { return v < b.t; });
                if (upper == breakpoints.begin()) return breakpoints.front().mu;
                if (upper == breakpoints.end()) return breakpoints.back().mu;
                const auto& a = *(upper - 1);
                const auto& b = *upper;
                return a.mu + (b.mu - a.mu) * (t - a.t) / (b.t - a.t);
            }
        }
        return 0.0;
    }

    /// Time derivative of mu on the open interval (0, t_f).
    double mu_dot(double t) const {
        if (t < 0.0 || t > t_f) return 0.0;
        if (kind != ScheduleKind::Piecewise) return beta;
        auto upper = std::upper_bound(breakpoints.begin(), breakpoints.end(), t,
                                      [](double v, const Breakpoint& b) { return v < b.t; });
        if (upper == breakpoints.begin() || upper == breakpoints.end()) return 0.0;
        const auto& a = *(upper - 1);
        return (upper->mu - a.mu) / (upper->t - a.t);
    }
};

namespace detail {
inline void check_schedule_basics(double t_f, int n_atoms, int k, const char* who) {
    if (!(t_f > 0.0) || !std::isfinite(t_f)) throw std::invalid_argument(std::string(who) + ": t_f must be > 0");
    detail::check_index(n_atoms, k, who);
}
}  // namespace detail

/// mu(t) = t / t_f.
inline Schedule linear_schedule(double t_f, int n_atoms, int k) {
    detail::check_schedule_basics(t_f, n_atoms, k, "linear_schedule");
    Schedule s;
    s.kind = ScheduleKind::Linear;
    s.t_f = t_f;
    s.n_atoms = n_atoms;
    s.k = k;
    s.beta = 1.0 / t_f;
    return s;
}

/// Jump to C = 1 - q/N at t = 0, then ramp with slope q/(t_f N) to reach 1 at t_f.
inline Schedule quench_schedule(double t_f, int n_atoms, int k, double q) {
    detail::check_schedule_basics(t_f, n_atoms, k, "quench_schedule");
    if (!(q > 0.0) || !(q < n_atoms))
        throw std::invalid_argument("quench_schedule: q must satisfy 0 < q < N");
    Schedule s;
    s.kind = ScheduleKind::Quench;
    s.t_f = t_f;
    s.n_atoms = n_atoms;
    s.k = k;
    s.q = q;
    s.beta = q / (t_f * n_atoms);
    s.offset = 1.0 - q / n_atoms;
    return s;
}

/// Continuous piecewise-linear profile through the given breakpoints. The first
/// breakpoint must sit at t = 0 and mu must not decrease. The last breakpoint
/// fixes t_f; ending below mu = 1 is allowed (a constant profile freezes the drive).
inline Schedule piecewise_schedule(std::vector<Breakpoint> breakpoints, int n_atoms, int k) {
    if (breakpoints.size() < 2) throw std::invalid_argument("piecewise_schedule: need at least 2 breakpoints");
    if (breakpoints.front().t != 0.0) throw std::invalid_argument("piecewise_schedule: first breakpoint must be at t = 0");
    for (std::size_t i = 1; i < breakpoints.size(); ++i) {
        if (!(breakpoints[i].t > breakpoints[i - 1].t))
            throw std::invalid_argument("piecewise_schedule: breakpoint times must increase strictly");
        if (breakpoints[i].mu < breakpoints[i - 1].mu)
            throw std::invalid_argument("piecewise_schedule: mu must be nondecreasing");
    }
    if (breakpoints.front().mu < 0.0) throw std::invalid_argument("piecewise_schedule: mu must be >= 0");
    const double t_f = breakpoints.back().t;
    detail::check_schedule_basics(t_f, n_atoms, k, "piecewise_schedule");
    Schedule s;
    s.kind = ScheduleKind::Piecewise;
    s.t_f = t_f;
    s.n_atoms = n_atoms;
    s.k = k;
    s.offset = breakpoints.front().mu;
    s.breakpoints = std::move(breakpoints);
    return s;
}

inline double chi_of(const Schedule& s, double t) { return chi_for_dark(s.n_atoms, s.k, s.mu(t)); }

/// |<psi_k(0)|psi_k(C)>|^2 = N_k(C)^2 N! right after the quench.
inline double quench_initial_fidelity(int n_atoms, int k, double q) {
    detail::check_index(n_atoms, k, "quench_initial_fidelity");
    if (!(q > 0.0) || !(q < n_atoms))
        throw std::invalid_argument("quench_initial_fidelity: q must satisfy 0 < q < N");
    const double c = 1.0 - q / n_atoms;
    return std::exp(logmath::log_factorial(n_atoms) - 2.0 * log_inv_normalization_Nk(n_atoms, k, c));
}

struct QScanPoint {
    double q = 0.0;
    std::optional<double> final_fidelity;  // empty when the run failed
    std::string error;
};

struct QScanResult {
    double q_best = 0.0;
    double best_fidelity = 0.0;
    std::vector<QScanPoint> table;  // ordered by q
};

/// Exhaustive scan over q. `runner(schedule)` returns the final fidelity and
/// may throw; failed points are kept in the table with their message. Points
/// are dispatched to up to `jobs` concurrent workers and merged in q order.
/// Ties go to the smaller q.
template <typename Runner>
QScanResult optimize_q(int n_atoms, int k, double t_f, std::vector<double> q_grid, Runner&& runner,
                       unsigned jobs = 1) {
    if (q_grid.empty()) throw std::invalid_argument("optimize_q: q grid is empty");
    for (double q : q_grid)
        if (!(q > 0.0) || !(q < n_atoms)) throw std::invalid_argument("optimize_q: every q must satisfy 0 < q < N");
    std::sort(q_grid.begin(), q_grid.end());

    QScanResult result;
    result.table.resize(q_grid.size());
    auto evaluate = [&](std::size_t idx) {
        QScanPoint point;
        point.q = q_grid[idx];
        try {
            point.final_fidelity = runner(quench_schedule(t_f, n_atoms, k, q_grid[idx]));
        } catch (const std::exception& e) {
            point.error = e.what();
        }
        result.table[idx] = std::move(point);
    };

    jobs = std::max(1u, jobs);
    std::size_t next = 0;
    while (next < q_grid.size()) {
        std::vector<std::future<void>> batch;
        for (unsigned w = 0; w < jobs && next < q_grid.size(); ++w, ++next)
            batch.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, evaluate, next));
        for (auto& f : batch) f.get();
    }

    bool found = false;
    for (const auto& p : result.table) {
        if (p.final_fidelity && (!found || *p.final_fidelity > result.best_fidelity)) {
            result.q_best = p.q;
            result.best_fidelity = *p.final_fidelity;
            found = true;
        }
    }
    if (!found) throw std::runtime_error("optimize_q: every grid point failed");
    return result;
}

inline void write_q_scan_csv(std::ostream& out, const QScanResult& scan, int n_atoms) {
    out << "q,q_over_N,final_fidelity\n";
    for (const auto& p : scan.table) csv::write_row(out, p.q, p.q / n_atoms, p.final_fidelity);
}

}  // namespace dfs
