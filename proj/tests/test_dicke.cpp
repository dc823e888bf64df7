#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "dfs/dfs_eigen.hpp"
#include "dfs/dicke.hpp"

using dfs::build_collective_ops;
using dfs::spin_coherent_state;

TEST(CollectiveOps, SpinHalfMatrices) {
    const auto ops = build_collective_ops(1);
    Eigen::MatrixXd expected_plus(2, 2);
    expected_plus << 0, 0, 1, 0;
    EXPECT_TRUE(ops.j_plus.isApprox(expected_plus));
    EXPECT_DOUBLE_EQ(ops.j_z(0, 0), -0.5);
    EXPECT_DOUBLE_EQ(ops.j_z(1, 1), 0.5);
}

TEST(CollectiveOps, SpinOneLadder) {
    const auto ops = build_collective_ops(2);
    EXPECT_NEAR(ops.j_plus(1, 0), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(ops.j_plus(2, 1), std::sqrt(2.0), 1e-15);
}

TEST(CollectiveOps, RejectsZeroAtoms) { EXPECT_THROW(build_collective_ops(0), std::invalid_argument); }

TEST(CollectiveOps, AngularMomentumAlgebraUpTo40) {
    for (int n = 1; n <= 40; ++n) {
        const auto ops = build_collective_ops(n);
        const Eigen::MatrixXd& jp = ops.j_plus;
        const Eigen::MatrixXd& jm = ops.j_minus;
        const Eigen::MatrixXd& jz = ops.j_z;
        EXPECT_EQ((jp - jm.transpose()).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_LE((jp * jm - jm * jp - 2.0 * jz).cwiseAbs().maxCoeff(), 1e-12) << "N=" << n;
        EXPECT_LE((jz * jp - jp * jz - jp).cwiseAbs().maxCoeff(), 1e-12) << "N=" << n;
        EXPECT_LE((jz * jm - jm * jz + jm).cwiseAbs().maxCoeff(), 1e-12) << "N=" << n;
        for (int i = 0; i <= n; ++i) EXPECT_DOUBLE_EQ(jz(i, i), -0.5 * n + i);
    }
}

TEST(SpinCoherent, Poles) {
    const auto up = spin_coherent_state(4, {0.0, 0.0});
    EXPECT_NEAR(std::abs(up.amplitudes(4)), 1.0, 1e-15);
    EXPECT_NEAR(up.amplitudes.head(4).norm(), 0.0, 1e-15);

    const auto down = spin_coherent_state(4, {std::numbers::pi, 0.0});
    EXPECT_NEAR(std::abs(down.amplitudes(0)), 1.0, 1e-15);
    EXPECT_NEAR(down.amplitudes.tail(4).norm(), 0.0, 1e-15);
}

TEST(SpinCoherent, EquatorBinomial) {
    const auto s = spin_coherent_state(2, {std::numbers::pi / 2, 0.0});
    EXPECT_NEAR(s.amplitudes(0).real(), 0.5, 1e-15);
    EXPECT_NEAR(s.amplitudes(1).real(), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(s.amplitudes(2).real(), 0.5, 1e-15);
}

TEST(SpinCoherent, NormalizedOnGridIncludingLargeN) {
    for (int n : {1, 5, 20, 80, 300}) {
        for (double theta = 0.0; theta <= std::numbers::pi; theta += std::numbers::pi / 13) {
            for (double phi = 0.0; phi < 2 * std::numbers::pi; phi += 0.7) {
                EXPECT_NEAR(spin_coherent_state(n, {theta, phi}).norm(), 1.0, 1e-12);
            }
        }
    }
}

TEST(SpinCoherent, RejectsOutOfRangeAngles) {
    EXPECT_THROW(spin_coherent_state(3, {-0.1, 0.0}), std::invalid_argument);
    EXPECT_THROW(spin_coherent_state(3, {0.0, 2 * std::numbers::pi}), std::invalid_argument);
}

TEST(BlochMap, AllUpPeaksAtNorthPole) {
    Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(7);
    amps(6) = 1.0;
    const dfs::DickeKet up(6, amps);
    const auto map = dfs::bloch_overlap_map(up, 9, 8);
    for (int j = 0; j < 8; ++j) EXPECT_NEAR(map.overlap(0, j), 1.0, 1e-14);
    EXPECT_LE(map.overlap.maxCoeff(), 1.0);
    EXPECT_GE(map.overlap.minCoeff(), 0.0);
}

TEST(BlochMap, GridConvention) {
    const auto map = dfs::bloch_overlap_map(dfs::ground_state(3), 5, 4);
    EXPECT_DOUBLE_EQ(map.theta(0), 0.0);
    EXPECT_DOUBLE_EQ(map.theta(4), std::numbers::pi);
    EXPECT_DOUBLE_EQ(map.phi(0), 0.0);
    EXPECT_NEAR(map.phi(3), 1.5 * std::numbers::pi, 1e-15);
}

TEST(BlochMap, CoherentEigenstateLobeAtPlusX) {
    const auto psi = dfs::eigenstate(20, 0, 1.0);
    const auto map = dfs::bloch_overlap_map(psi, 33, 32);
    Eigen::Index row, col;
    map.overlap.maxCoeff(&row, &col);
    EXPECT_EQ(row, 16);  // theta = pi/2
    EXPECT_EQ(col, 0);   // phi = 0
    EXPECT_NEAR(map.overlap(16, 0), 1.0, 1e-12);
}

TEST(BlochMap, RingStateVanishesOnXAxis) {
    const auto psi = dfs::eigenstate(20, 10, 1.0);
    const auto map = dfs::bloch_overlap_map(psi, 33, 32);
    EXPECT_LT(map.overlap(16, 0), 1e-10);
    EXPECT_LT(map.overlap(16, 16), 1e-10);  // -x as well
    // Maximum sits on the great circle <Jx> = 0: at the poles or phi = pi/2, 3pi/2.
    Eigen::Index row, col;
    map.overlap.maxCoeff(&row, &col);
    const double theta = map.theta(row), phi = map.phi(col);
    const double jx = std::sin(theta) * std::cos(phi);
    EXPECT_NEAR(jx, 0.0, 1e-12);
}

TEST(BlochMap, RejectsUnnormalizedState) {
    Eigen::VectorXcd amps = Eigen::VectorXcd::Ones(3);
    EXPECT_THROW(dfs::bloch_overlap_map(dfs::DickeKet(2, amps), 4, 4), std::invalid_argument);
    EXPECT_THROW(dfs::bloch_overlap_map(dfs::ground_state(2), 1, 4), std::invalid_argument);
}

// (N+1)/(4 pi) * integral |<theta,phi|psi>|^2 dOmega = 1 on the symmetric manifold.
TEST(BlochMap, ResolutionOfIdentity) {
    for (int n : {1, 4, 10}) {
        for (int k : {0, n / 2}) {
            const auto psi = dfs::eigenstate(n, k, 0.6);
            const int nt = 201, np = 64;
            const auto map = dfs::bloch_overlap_map(psi, nt, np);
            double integral = 0.0;
            const double dt = std::numbers::pi / (nt - 1), dp = 2 * std::numbers::pi / np;
            for (int a = 0; a < nt; ++a) {
                const double w = (a == 0 || a == nt - 1) ? 0.5 : 1.0;
                integral += w * std::sin(map.theta(a)) * map.overlap.row(a).sum() * dt * dp;
            }
            EXPECT_NEAR(integral * (n + 1) / (4 * std::numbers::pi), 1.0, 1e-3) << "N=" << n << " k=" << k;
        }
    }
}

TEST(BlochMap, CsvHeaderAndRowOrder) {
    const auto map = dfs::bloch_overlap_map(dfs::ground_state(1), 2, 2);
    std::ostringstream out;
    dfs::write_bloch_map_csv(out, map);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "theta,phi,overlap");
    std::getline(in, line);
    EXPECT_EQ(line.substr(0, 4), "0,0,");
    std::getline(in, line);
    EXPECT_EQ(line.substr(0, 2), "0,");  // second phi at the same theta
}
