#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "dfs/lindblad.hpp"
#include "dfs/schedules.hpp"
#include "oracle.hpp"

TEST(LinearSchedule, Examples) {
    const auto s = dfs::linear_schedule(40.0, 10, 0);
    EXPECT_EQ(s.mu(0.0), 0.0);
    EXPECT_EQ(s.mu(40.0), 1.0);
    EXPECT_DOUBLE_EQ(s.mu(20.0), 0.5);
    EXPECT_EQ(s.mu(-1.0), 0.0);
    EXPECT_DOUBLE_EQ(s.beta, 1.0 / 40.0);
    EXPECT_DOUBLE_EQ(s.mu_dot(10.0), 1.0 / 40.0);
    EXPECT_THROW(dfs::linear_schedule(0.0, 10, 0), std::invalid_argument);
    EXPECT_THROW(dfs::linear_schedule(10.0, 10, 11), std::invalid_argument);
}

TEST(QuenchSchedule, Examples) {
    const auto s = dfs::quench_schedule(40.0, 16, 0, 4.0);
    EXPECT_DOUBLE_EQ(s.offset, 0.75);
    EXPECT_DOUBLE_EQ(s.beta, 0.00625);
    EXPECT_EQ(s.mu(40.0), 1.0);
    EXPECT_DOUBLE_EQ(s.mu(0.0), 0.75);
    EXPECT_EQ(s.mu(-1e-12), 0.0);

    EXPECT_NEAR(dfs::quench_schedule(40.0, 10, 0, std::sqrt(10.0)).mu(0.0), 1 - 1 / std::sqrt(10.0), 1e-15);
    EXPECT_DOUBLE_EQ(dfs::quench_schedule(40.0, 20, 10, 2.0).mu(0.0), 0.9);

    EXPECT_THROW(dfs::quench_schedule(40.0, 10, 0, 10.0), std::invalid_argument);
    EXPECT_THROW(dfs::quench_schedule(40.0, 10, 0, 0.0), std::invalid_argument);
    EXPECT_THROW(dfs::quench_schedule(40.0, 10, 0, -1.0), std::invalid_argument);
}

TEST(Schedules, ReachUnitRatioExactlyAndStayMonotone) {
    for (const auto& s : {dfs::linear_schedule(37.0, 12, 3), dfs::quench_schedule(37.0, 12, 3, std::sqrt(12.0))}) {
        EXPECT_EQ(s.mu(s.t_f), 1.0);
        double last = s.mu(0.0);
        for (int i = 1; i <= 1000; ++i) {
            const double mu = s.mu(s.t_f * i / 1000.0);
            EXPECT_GE(mu, last);
            EXPECT_LE(mu, 1.0);
            last = mu;
        }
        // Continuity on (0, t_f].
        for (double t : {1e-3, 5.0, 20.0, 36.999}) EXPECT_NEAR(s.mu(t + 1e-9), s.mu(t), 1e-9);
    }
}

TEST(PiecewiseSchedule, InterpolatesAndValidates) {
    const auto s = dfs::piecewise_schedule({{0.0, 0.0}, {10.0, 0.8}, {30.0, 1.0}}, 6, 0);
    EXPECT_EQ(s.t_f, 30.0);
    EXPECT_DOUBLE_EQ(s.mu(5.0), 0.4);
    EXPECT_DOUBLE_EQ(s.mu(20.0), 0.9);
    EXPECT_EQ(s.mu(30.0), 1.0);
    EXPECT_DOUBLE_EQ(s.mu_dot(5.0), 0.08);
    EXPECT_DOUBLE_EQ(s.mu_dot(20.0), 0.01);

    EXPECT_THROW(dfs::piecewise_schedule({{0.0, 0.0}}, 6, 0), std::invalid_argument);
    EXPECT_THROW(dfs::piecewise_schedule({{1.0, 0.0}, {2.0, 1.0}}, 6, 0), std::invalid_argument);
    EXPECT_THROW(dfs::piecewise_schedule({{0.0, 0.5}, {2.0, 0.4}}, 6, 0), std::invalid_argument);
    EXPECT_THROW(dfs::piecewise_schedule({{0.0, 0.0}, {2.0, 0.5}, {2.0, 1.0}}, 6, 0), std::invalid_argument);
    EXPECT_THROW(dfs::piecewise_schedule({{0.0, -0.1}, {2.0, 1.0}}, 6, 0), std::invalid_argument);
}

TEST(ChiOf, Examples) {
    const auto centre = dfs::linear_schedule(40.0, 10, 5);
    for (double t : {0.0, 13.0, 40.0}) EXPECT_EQ(dfs::chi_of(centre, t), 0.0);
    const auto s = dfs::linear_schedule(2.0, 4, 0);
    EXPECT_DOUBLE_EQ(dfs::chi_of(s, 1.0), -2.0);
    EXPECT_EQ(dfs::chi_of(s, -1.0), 0.0);

    // The quench discontinuity at t = 0 is inherited by chi.
    const auto q = dfs::quench_schedule(10.0, 4, 0, 1.0);
    EXPECT_EQ(dfs::chi_of(q, -1e-12), 0.0);
    EXPECT_DOUBLE_EQ(dfs::chi_of(q, 0.0), -0.75 * 4);
}

TEST(QuenchInitialFidelity, Examples) {
    EXPECT_NEAR(dfs::quench_initial_fidelity(1, 0, 0.5), 0.8, 1e-15);
    const Eigen::VectorXd psi = oracle::eigen_ket(2, 0, 0.5);
    EXPECT_NEAR(dfs::quench_initial_fidelity(2, 0, 1.0), psi(0) * psi(0), 1e-15);
    // q -> 0 approaches the mu = 1 closed form.
    for (int k = 0; k <= 6; ++k)
        EXPECT_NEAR(dfs::quench_initial_fidelity(6, k, 1e-9),
                    oracle::factorial(6) / (std::pow(2.0, 6) * oracle::factorial(6 - k) * oracle::factorial(k)), 1e-8);
    EXPECT_THROW(dfs::quench_initial_fidelity(4, 0, 4.0), std::invalid_argument);
}

TEST(QuenchInitialFidelity, EqualsEngineFidelityAtStart) {
    dfs::JumpParams base;
    for (int n = 1; n <= 12; ++n)
        for (int k = 0; k <= n; ++k)
            for (double frac : {0.1, 0.3, 0.6}) {
                const double q = frac * n;
                const auto ground = dfs::DensityMatrix::pure(dfs::ground_state(n));
                const double expected = dfs::quench_initial_fidelity(n, k, q);
                const auto target = dfs::eigenstate(n, k, 1.0 - q / n);
                EXPECT_NEAR(dfs::fidelity(ground, target), expected, 1e-10);
            }
}

TEST(OptimizeQ, PicksArgmaxWithFullTable) {
    auto runner = [](const dfs::Schedule& s) { return 1.0 - std::pow(s.q - 1.3, 2); };
    const auto result = dfs::optimize_q(10, 0, 40.0, {2.0, 0.5, 1.0, 1.5}, runner);
    EXPECT_EQ(result.q_best, 1.5);
    ASSERT_EQ(result.table.size(), 4u);
    EXPECT_EQ(result.table.front().q, 0.5);
    EXPECT_EQ(result.table.back().q, 2.0);
}

TEST(OptimizeQ, TiesGoToSmallerQ) {
    auto runner = [](const dfs::Schedule& s) { return s.q < 3.0 ? 0.5 : 0.9; };
    EXPECT_EQ(dfs::optimize_q(10, 0, 40.0, {5.0, 4.0, 3.0, 1.0}, runner).q_best, 3.0);
}

TEST(OptimizeQ, SingletonAndFailures) {
    auto runner = [](const dfs::Schedule& s) -> double {
        if (s.q > 4.0) throw dfs::IntegrationDiverged("boom", 3, 0.1);
        return 0.5;
    };
    EXPECT_EQ(dfs::optimize_q(10, 0, 40.0, {2.5}, runner).q_best, 2.5);
    const auto result = dfs::optimize_q(10, 0, 40.0, {2.0, 5.0}, runner);
    EXPECT_EQ(result.q_best, 2.0);
    EXPECT_FALSE(result.table[1].final_fidelity.has_value());
    EXPECT_EQ(result.table[1].error, "boom");
    EXPECT_THROW(dfs::optimize_q(10, 0, 40.0, {5.0, 6.0}, runner), std::runtime_error);
    EXPECT_THROW(dfs::optimize_q(10, 0, 40.0, {}, runner), std::invalid_argument);
    EXPECT_THROW(dfs::optimize_q(10, 0, 40.0, {10.0}, runner), std::invalid_argument);
}

TEST(OptimizeQ, ParallelMatchesSerial) {
    std::atomic<int> calls{0};
    auto runner = [&](const dfs::Schedule& s) {
        ++calls;
        return std::sin(s.q);
    };
    std::vector<double> grid;
    for (int i = 1; i < 20; ++i) grid.push_back(0.5 * i);
    const auto serial = dfs::optimize_q(10, 0, 40.0, grid, runner, 1);
    const auto parallel = dfs::optimize_q(10, 0, 40.0, grid, runner, 4);
    EXPECT_EQ(calls.load(), 38);
    EXPECT_EQ(serial.q_best, parallel.q_best);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(serial.table[i].final_fidelity, parallel.table[i].final_fidelity);
}

TEST(OptimizeQ, CsvLayout) {
    auto runner = [](const dfs::Schedule& s) -> double {
        if (s.q > 2.0) throw std::runtime_error("x");
        return 0.25;
    };
    std::ostringstream out;
    dfs::write_q_scan_csv(out, dfs::optimize_q(4, 0, 1.0, {1.0, 3.0}, runner), 4);
    EXPECT_EQ(out.str(), "q,q_over_N,final_fidelity\n1,0.25,0.25\n3,0.75,\n");
}
