#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cosmicbell/chstats.hpp"
#include "cosmicbell/polytopes.hpp"
#include "fixtures.hpp"

using namespace cosmicbell;
namespace cs = cosmicbell::chstats;

TEST(ChJ, Table2) {
    const auto t = fixtures::table2();
    EXPECT_EQ(t.total(), fixtures::kTable2Total);
    EXPECT_NEAR(cs::ch_j(t), fixtures::kJ, 1e-7);
}

TEST(ChJ, AllZeroOutcomes) {
    CountsTable t;
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) t(0, 0, x, y) = 100;
    EXPECT_EQ(cs::ch_j(t), 0.0);
}

TEST(ChJ, PrBoxFrequencies) {
    CountsTable t;
    const auto pr = polytopes::pr_box(0);
    for (int c = 0; c < kCells; ++c) t.n[c] = static_cast<std::uint64_t>(pr[c] * 1000);
    EXPECT_DOUBLE_EQ(cs::ch_j(t), -0.5);
}

TEST(ChJ, RejectsEmptySetting) {
    CountsTable t;
    t(0, 0, 0, 0) = 5;
    EXPECT_THROW(cs::ch_j(t), ValidationError);
}

TEST(ChJ, InvariantUnderRelabelingNonContributingCells) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> d(1, 1000);
    for (int trial = 0; trial < 200; ++trial) {
        CountsTable t;
        for (auto& v : t.n) v = static_cast<std::uint64_t>(d(rng));
        auto u = t;
        // Cells with no J weight: within (0,1) the pair b = 0/1 at a = 0; within (1,0)
        // the pair a = 0/1 at b = 0; within (1,1) everything but (11).
        std::swap(u(0, 0, 0, 1), u(0, 1, 0, 1));
        std::swap(u(0, 0, 1, 0), u(1, 0, 1, 0));
        std::swap(u(0, 0, 1, 1), u(1, 0, 1, 1));
        std::swap(u(1, 0, 1, 1), u(0, 1, 1, 1));
        EXPECT_NEAR(cs::ch_j(t), cs::ch_j(u), 1e-15);
    }
}

TEST(ZTests, Table2PValues) {
    const auto z = cs::nosignaling_ztests(fixtures::table2());
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(z[i].p_value, fixtures::kZPValues[i], 2e-3) << "condition " << i;
        EXPECT_FALSE(z[i].degenerate);
    }
}

TEST(ZTests, IdenticalProportionsGivePOne) {
    const auto z = cs::two_proportion_ztest(30, 100, 30, 100);
    EXPECT_EQ(z.z, 0.0);
    EXPECT_EQ(z.p_value, 1.0);
}

TEST(ZTests, ExtremeSeparation) { EXPECT_LT(cs::two_proportion_ztest(9000, 10000, 1000, 10000).p_value, 1e-15); }

TEST(ZTests, DegeneratePooledProportion) {
    const auto z = cs::two_proportion_ztest(0, 50, 0, 70);
    EXPECT_TRUE(z.degenerate);
    EXPECT_EQ(z.p_value, 1.0);
    EXPECT_TRUE(cs::two_proportion_ztest(50, 50, 70, 70).degenerate);
}

TEST(ZTests, PValueRangeAndSwapSymmetry) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::uint64_t> n(1, 5000);
    for (int trial = 0; trial < 500; ++trial) {
        const auto n1 = n(rng), n2 = n(rng);
        const auto k1 = std::uniform_int_distribution<std::uint64_t>(0, n1)(rng);
        const auto k2 = std::uniform_int_distribution<std::uint64_t>(0, n2)(rng);
        const auto a = cs::two_proportion_ztest(k1, n1, k2, n2);
        const auto b = cs::two_proportion_ztest(k2, n2, k1, n1);
        EXPECT_GE(a.p_value, 0.0);
        EXPECT_LE(a.p_value, 1.0);
        EXPECT_DOUBLE_EQ(a.p_value, b.p_value);
    }
}

TEST(BiasEstimate, PublishedTable) {
    for (const auto& row : fixtures::kMonitors) {
        EXPECT_NEAR(cs::bias_estimate({row.r_a, row.snr_a}), row.eps_a, 1e-5);
        EXPECT_NEAR(cs::bias_estimate({row.r_b, row.snr_b}), row.eps_b, 1e-5);
    }
}

TEST(BiasEstimate, NoiselessUnbiased) {
    EXPECT_NEAR(cs::bias_estimate({1.0, 1e12}), 0.0, 1e-9);
    EXPECT_EQ(cs::bias_estimate({1.0, std::numeric_limits<double>::infinity()}), 0.0);
}

TEST(BiasEstimate, RejectsNonPositive) {
    EXPECT_THROW(cs::bias_estimate({0.0, 10.0}), ValidationError);
    EXPECT_THROW(cs::bias_estimate({1.0, 0.0}), ValidationError);
}

TEST(BiasEstimate, MonotoneInSnrAndSymmetricInRatio) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> lr(-0.5, 0.5), ls(-1.0, 4.0);
    for (int trial = 0; trial < 500; ++trial) {
        const double r = std::exp(lr(rng));
        const double s1 = std::pow(10.0, ls(rng)), s2 = s1 * (1.0 + std::abs(lr(rng)));
        EXPECT_GE(cs::bias_estimate({r, s1}), cs::bias_estimate({r, s2}) - 1e-15);
        EXPECT_NEAR(cs::bias_estimate({r, s1}), cs::bias_estimate({1.0 / r, s1}), 1e-15);
    }
}

TEST(Hoeffding, PeriodTwoAlice) {
    const auto& row = fixtures::kConsistency[1];
    const auto h = cs::hoeffding_consistency(row.a0, row.a1, 0.00217);
    EXPECT_GE(h.lower_bound, 0.9996);
    EXPECT_NEAR(h.lower_bound, fixtures::kCA2, 5e-5);
}

TEST(Hoeffding, PeriodOneAliceTailOrder) {
    const auto& row = fixtures::kConsistency[0];
    const auto h = cs::hoeffding_consistency(row.a0, row.a1, 0.00295);
    EXPECT_GT(h.lower_bound, 1.0 - 1e-6);
    EXPECT_LT(h.lower_bound, 1.0);
    EXPECT_LT(std::abs(h.log10_tail - row.log10_tail_a), 1.0);
}

TEST(Hoeffding, BoundaryIsZero) {
    // f = 0.51 = 1/2 + eps exactly
    const auto h = cs::hoeffding_consistency(51, 49, 0.01);
    EXPECT_NEAR(h.lower_bound, 0.0, 1e-12);
    EXPECT_EQ(cs::hoeffding_consistency(70, 30, 0.01).lower_bound, 0.0);
}

TEST(Hoeffding, MonotoneInEpsAndN) {
    double prev = 0.0;
    for (double eps = 0.011; eps < 0.05; eps += 0.001) {
        const double c = cs::hoeffding_consistency(510, 490, eps).lower_bound;
        EXPECT_GE(c, prev);
        prev = c;
    }
    prev = 0.0;
    for (std::uint64_t k = 1; k < 50; ++k) {
        const double c = cs::hoeffding_consistency(51 * k, 49 * k, 0.015).lower_bound;
        EXPECT_GE(c, prev);
        prev = c;
    }
}

TEST(Efficiency, HeraldingBudgets) {
    const cs::EfficiencyBudget alice{0.939, 0.959, 0.99, 0.948, 0.932};
    const cs::EfficiencyBudget bob{0.944, 0.959, 0.99, 0.952, 0.922};
    EXPECT_NEAR(cs::heralding_budget(alice), 0.788, 1e-3);
    EXPECT_NEAR(cs::heralding_budget(bob), 0.787, 1e-3);
    EXPECT_EQ(cs::heralding_budget({}), 1.0);
}

TEST(Efficiency, SourceOptics) {
    const std::vector<double> elements{0.9927, 0.996, 0.9946, 0.9946, 0.9946, 0.9946, 0.9993, 0.996, 0.996};
    EXPECT_NEAR(cs::optical_transmission(elements), 0.959, 1e-3);
}

TEST(Efficiency, InferScInvertsBudget) {
    const cs::EfficiencyBudget b{0.939, 0.959, 0.99, 0.948, 0.932};
    EXPECT_NEAR(cs::infer_sc(cs::heralding_budget(b), b), 0.939, 1e-14);
    EXPECT_THROW(cs::infer_sc(0.5, {1.0, 0.0, 1.0, 1.0, 1.0}), ValidationError);
    EXPECT_THROW(cs::heralding_budget({1.2, 1.0, 1.0, 1.0, 1.0}), ValidationError);
}
