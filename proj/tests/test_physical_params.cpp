#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "dfs/physical_params.hpp"

namespace {

// S1 = g |Omega1| / (2 |Delta_l|) = 1 with kappa = 100.
dfs::PhysicalParams unit_s1() {
    dfs::PhysicalParams p;
    p.g = 2.0;
    p.omega_1_abs = 10.0;
    p.delta_l = 10.0;
    p.delta_r = 10.0;
    p.kappa = 100.0;
    p.n_atoms = 4;
    return p;
}

}  // namespace

TEST(EffectiveParams, Rate) {
    const auto j = dfs::effective_params(unit_s1());
    EXPECT_DOUBLE_EQ(j.gamma_c, 0.02);
    EXPECT_EQ(j.nu, 0.0);
    EXPECT_EQ(j.mu, 0.0);
    EXPECT_EQ(j.chi, 0.0);
}

TEST(EffectiveParams, Ratios) {
    auto p = unit_s1();
    p.omega_1_abs = 40.0;  // S1 = 4
    p.omega_2_abs = 10.0;  // S2 = 1
    p.eta = 2.0;
    p.delta_c = 50.0;
    const auto j = dfs::effective_params(p);
    EXPECT_DOUBLE_EQ(j.mu, 0.5);
    EXPECT_DOUBLE_EQ(j.chi, 0.5);
    EXPECT_DOUBLE_EQ(j.nu, 0.5);
    EXPECT_DOUBLE_EQ(j.gamma_c, 2.0 * 100.0 * 16.0 / (2500.0 + 10000.0));
}

TEST(EffectiveParams, DetuningSignIgnored) {
    auto p = unit_s1();
    p.omega_2_abs = 10.0;
    auto q = p;
    q.delta_l = -p.delta_l;
    q.delta_r = -p.delta_r;
    EXPECT_EQ(dfs::effective_params(p).mu, dfs::effective_params(q).mu);
    EXPECT_EQ(dfs::effective_params(p).gamma_c, dfs::effective_params(q).gamma_c);
}

TEST(EffectiveParams, ScaleCovariance) {
    auto p = unit_s1();
    p.omega_2_abs = 3.0;
    p.eta = 0.7;
    p.delta_c = -30.0;
    const auto base = dfs::effective_params(p);
    for (double s : {1e-3, 0.37, 2.0, 1e4}) {
        auto scaled = p;
        scaled.kappa *= s;
        scaled.delta_c *= s;
        scaled.g *= s;  // S1 and S2 scale with g
        scaled.eta *= s;
        const auto j = dfs::effective_params(scaled);
        EXPECT_NEAR(j.gamma_c, s * base.gamma_c, 1e-12 * s * base.gamma_c);
        EXPECT_NEAR(j.mu, base.mu, 1e-14);
        EXPECT_NEAR(j.chi, base.chi, 1e-14);
        EXPECT_NEAR(j.nu, base.nu, 1e-14);
    }
}

TEST(EffectiveParams, Rejections) {
    auto p = unit_s1();
    p.omega_1_abs = 0.0;
    EXPECT_THROW(dfs::effective_params(p), std::invalid_argument);
    p = unit_s1();
    p.kappa = 0.0;
    EXPECT_THROW(dfs::effective_params(p), std::invalid_argument);
    p = unit_s1();
    p.delta_l = 0.0;
    EXPECT_THROW(dfs::effective_params(p), std::invalid_argument);
    p = unit_s1();
    p.delta_r = 0.0;
    EXPECT_NO_THROW(dfs::effective_params(p));  // Omega2 = 0
    p.omega_2_abs = 1.0;
    EXPECT_THROW(dfs::effective_params(p), std::invalid_argument);
    p = unit_s1();
    p.delta_up = 0.1;
    EXPECT_THROW(dfs::effective_params(p), std::invalid_argument);
    p = unit_s1();
    p.delta_d = -0.1;
    EXPECT_THROW(dfs::effective_params(p), std::invalid_argument);
}

TEST(ValidityReport, RatiosAndThreshold) {
    dfs::PhysicalParams p;
    p.n_atoms = 4;
    p.kappa = 100.0;
    p.g = 1.0;
    p.omega_1_abs = 1.0;
    p.delta_l = 6.0;  // |Delta_l| / (sqrt(N) g) = 3
    p.delta_r = 1000.0;
    // S1 = 1/12, so kappa / (sqrt(N) S1) = 600.
    const auto report = dfs::validity_report(p);
    ASSERT_EQ(report.size(), 9u);
    for (const auto& c : report) {
        if (c.condition == "|Delta_l| >> sqrt(N) g") {
            EXPECT_DOUBLE_EQ(c.ratio, 3.0);
            EXPECT_FALSE(c.pass);
        }
        if (c.condition == "kappa >> sqrt(N) S1") {
            EXPECT_NEAR(c.ratio, 600.0, 1e-9);
            EXPECT_TRUE(c.pass);
        }
    }
}

TEST(ValidityReport, ExactThresholdAndVacuousPass) {
    dfs::PhysicalParams p;
    p.n_atoms = 1;
    p.kappa = 50.0;
    p.g = 1.0;
    p.omega_1_abs = 10.0;
    p.delta_l = 1.0;  // S1 = 5 -> kappa / S1 = 10
    const auto report = dfs::validity_report(p);
    EXPECT_DOUBLE_EQ(report[1].ratio, 10.0);
    EXPECT_TRUE(report[1].pass);

    dfs::PhysicalParams quiet;
    quiet.kappa = 1.0;
    quiet.delta_l = 1.0;
    quiet.delta_r = 1.0;
    for (const auto& c : dfs::validity_report(quiet)) {
        EXPECT_EQ(c.ratio, std::numeric_limits<double>::infinity());
        EXPECT_TRUE(c.pass);
    }
}
