#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "cosmicbell/chstats.hpp"
#include "cosmicbell/polytopes.hpp"
#include "cosmicbell/qsim.hpp"
#include "fixtures.hpp"

using namespace cosmicbell;
namespace qs = cosmicbell::qsim;

namespace {

// Two-qubit density matrix in the basis HH, HV, VH, VV with single-port
// projectors; dark clicks OR-ed in independently per side.
Behavior density_matrix_oracle(const qs::QuantumModel& m) {
    Eigen::Vector4d psi(0.0, 1.0, m.r, 0.0);
    psi /= psi.norm();
    const Eigen::Matrix4d rho = psi * psi.transpose();
    auto proj = [](double deg) {
        const double t = deg * std::numbers::pi / 180.0;
        Eigen::Vector2d v(std::cos(t), std::sin(t));
        return Eigen::Matrix2d(v * v.transpose());
    };
    auto kron = [](const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) {
        Eigen::Matrix4d k;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
        return k;
    };
    const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
    CellArray p{};
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            const auto pa = proj(m.angles_a[static_cast<std::size_t>(x)]);
            const auto pb = proj(m.angles_b[static_cast<std::size_t>(y)]);
            const double jab = (rho * kron(pa, pb)).trace() * m.eta_a * m.eta_b;
            const double ja = (rho * kron(pa, id)).trace() * m.eta_a;
            const double jb = (rho * kron(id, pb)).trace() * m.eta_b;
            const double keep = 1.0 - m.p_dark;
            const double none = (1.0 - ja - jb + jab) * keep * keep;
            const double a_silent = (1.0 - ja) * keep;
            const double b_silent = (1.0 - jb) * keep;
            p[cell(0, 0, x, y)] = none;
            p[cell(0, 1, x, y)] = a_silent - none;
            p[cell(1, 0, x, y)] = b_silent - none;
            p[cell(1, 1, x, y)] = 1.0 - a_silent - b_silent + none;
        }
    return Behavior::unchecked(p);
}

const qs::QuantumModel kPublishedSettings{0.41, {-83.5, -119.38}, {6.5, -29.38}, 1.0, 1.0, 0.0};

}  // namespace

TEST(ModelBehavior, NothingClicks) {
    const auto p = qs::model_behavior({0.4, {10, 20}, {30, 40}, 0.0, 0.0, 0.0});
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) EXPECT_EQ(p(0, 0, x, y), 1.0);
}

TEST(ModelBehavior, PublishedSettingsViolateAndMatchDensityMatrix) {
    const auto p = qs::model_behavior(kPublishedSettings);
    EXPECT_LT(chstats::ch_j(p), 0.0);
    const auto o = density_matrix_oracle(kPublishedSettings);
    for (int c = 0; c < kCells; ++c) EXPECT_NEAR(p[c], o[c], 1e-12);
}

TEST(ModelBehavior, RandomModelsMatchDensityMatrix) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0), ang(-180.0, 180.0);
    for (int trial = 0; trial < 200; ++trial) {
        const qs::QuantumModel m{u(rng), {ang(rng), ang(rng)}, {ang(rng), ang(rng)}, u(rng), u(rng), 0.01 * u(rng)};
        const auto p = qs::model_behavior(m);
        const auto o = density_matrix_oracle(m);
        for (int c = 0; c < kCells; ++c) EXPECT_NEAR(p[c], o[c], 1e-12);
    }
}

TEST(ModelBehavior, MaximallyEntangledAt45) {
    const auto p = qs::model_behavior({1.0, {45, 45}, {45, 45}, 0.9, 0.8, 0.0});
    EXPECT_NEAR(p(1, 1, 0, 0), 0.9 * 0.8 / 2.0, 1e-15);
}

TEST(ModelBehavior, ValidNoSignalingAndBounded) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0), ang(-180.0, 180.0);
    for (int trial = 0; trial < 500; ++trial) {
        const qs::QuantumModel m{u(rng), {ang(rng), ang(rng)}, {ang(rng), ang(rng)}, u(rng), u(rng), 0.0};
        const auto p = qs::model_behavior(m);
        EXPECT_NO_THROW(Behavior::from_array(p.values(), 1e-12));
        EXPECT_LT(p.signaling(), 1e-12);
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y)
                EXPECT_LE(p(1, 1, x, y), std::min(p.alice_marginal(1, x, y), p.bob_marginal(1, x, y)) + 1e-15);
    }
}

TEST(ModelBehavior, RejectsOutOfRange) {
    EXPECT_THROW(qs::model_behavior({1.5, {0, 0}, {0, 0}, 1, 1, 0}), ValidationError);
    EXPECT_THROW(qs::model_behavior({0.5, {0, 0}, {0, 0}, 1.1, 1, 0}), ValidationError);
    EXPECT_THROW(qs::model_behavior({0.5, {0, 0}, {0, 0}, 1, 1, -0.1}), ValidationError);
}

TEST(JGradient, MatchesFiniteDifferences) {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.1, 0.9), ang(-170.0, 170.0);
    for (int trial = 0; trial < 50; ++trial) {
        qs::QuantumModel m{u(rng), {ang(rng), ang(rng)}, {ang(rng), ang(rng)}, u(rng), u(rng), 0.0};
        const auto g = qs::j_gradient(m);
        auto at = [&](int i, double h) {
            auto mm = m;
            double* v[5] = {&mm.r, &mm.angles_a[0], &mm.angles_a[1], &mm.angles_b[0], &mm.angles_b[1]};
            *v[i] += h;
            return qs::model_j(mm);
        };
        for (int i = 0; i < 5; ++i) {
            const double h = i == 0 ? 1e-6 : 1e-4;
            const double fd = (at(i, h) - at(i, -h)) / (2 * h);
            EXPECT_NEAR(g[static_cast<std::size_t>(i)], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "component " << i;
        }
    }
}

TEST(Sampling, DeterministicBehaviorStaysOnItsCells) {
    const auto d = polytopes::lhv_vertices()[6];
    const auto t = qs::simulate_counts(d, JointSettingDistribution(0.3, 0.6, 0.2, 0.1), 10'000, 4);
    EXPECT_EQ(t.total(), 10'000u);
    for (int c = 0; c < kCells; ++c)
        if (d[c] == 0.0) {
            EXPECT_EQ(t.n[c], 0u);
        }
}

TEST(Sampling, Table2BehaviorWithinFiveSigma) {
    const auto p = fixtures::table2().empirical();
    const std::uint64_t n = 1'000'000;
    const auto t = qs::simulate_counts(p, {}, n, 12345);
    EXPECT_EQ(t.total(), n);
    for (int c = 0; c < kCells; ++c) {
        const double prob = 0.25 * p[c];
        const double sd = std::sqrt(n * prob * (1 - prob));
        EXPECT_LE(std::abs(static_cast<double>(t.n[c]) - n * prob), 5 * sd + 1e-9) << "cell " << c;
    }
}

TEST(Sampling, SeedDeterminismAndStreamAgreement) {
    const auto p = fixtures::table2().empirical();
    const auto a = qs::simulate_counts(p, {}, 300'000, 77, 1000);
    const auto b = qs::simulate_counts(p, {}, 300'000, 77, 1000);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, qs::simulate_counts(p, {}, 300'000, 78, 1000));
    std::vector<TrialRecord> trials;
    qs::simulate_trials(trials, p, {}, 300'000, 77, 3, 10, 1000);
    EXPECT_EQ(count_trials(trials), a);
    EXPECT_EQ(trials.front().index, 10u);
    EXPECT_EQ(trials.back().index, 300'009u);
    EXPECT_EQ(trials.front().period, 3);
}

TEST(Sampling, ZeroTrialsRejected) {
    EXPECT_THROW(qs::simulate_counts(Behavior::uniform(), {}, 0, 1), ValidationError);
}

TEST(Eberhard, PerfectEfficiencyReachesCirelsonCh) {
    const auto res = qs::eberhard_optimize(1.0, 1.0);
    EXPECT_NEAR(res.j_min, -(std::sqrt(2.0) - 1.0) / 2.0, 1e-6);
    EXPECT_NEAR(res.r, 1.0, 1e-3);
    EXPECT_TRUE(res.violation_found);
}

TEST(Eberhard, BruteForceGridAgreesAtPerfectEfficiency) {
    // Coarse grid on the angles with r = 1, then coordinate refinement.
    double best = 1.0;
    std::array<double, 4> arg{};
    for (int a1 = -90; a1 < 90; a1 += 5)
        for (int a2 = -90; a2 < 90; a2 += 5)
            for (int b1 = -90; b1 < 90; b1 += 5)
                for (int b2 = -90; b2 < 90; b2 += 5) {
                    const double j = qs::model_j({1.0, {double(a1), double(a2)}, {double(b1), double(b2)}, 1, 1, 0});
                    if (j < best) {
                        best = j;
                        arg = {double(a1), double(a2), double(b1), double(b2)};
                    }
                }
    for (double h = 2.5; h > 1e-7; h *= 0.5)
        for (int rep = 0; rep < 4; ++rep)
            for (int i = 0; i < 4; ++i)
                for (double s : {-h, h}) {
                    auto t = arg;
                    t[static_cast<std::size_t>(i)] += s;
                    const double j = qs::model_j({1.0, {t[0], t[1]}, {t[2], t[3]}, 1, 1, 0});
                    if (j < best) {
                        best = j;
                        arg = t;
                    }
                }
    EXPECT_NEAR(qs::eberhard_optimize(1.0, 1.0).j_min, best, 1e-8);
}

TEST(Eberhard, PaperEfficiency) {
    const auto res = qs::eberhard_optimize(0.788, 0.788);
    EXPECT_LT(res.j_min, 0.0);
    EXPECT_NEAR(res.r, 0.41, 0.03);
    EXPECT_NEAR(res.angles_a[0], -83.5, 2.0);
    EXPECT_NEAR(res.angles_a[1], -119.38, 2.0);
    EXPECT_NEAR(res.angles_b[0], 6.5, 2.0);
    EXPECT_NEAR(res.angles_b[1], -29.38, 2.0);
}

TEST(Eberhard, NoViolationAtTwoThirds) {
    const auto res = qs::eberhard_optimize(2.0 / 3.0, 2.0 / 3.0);
    EXPECT_GE(res.j_min, -1e-6);
}

TEST(Eberhard, OptimalJMonotoneInEfficiency) {
    double prev = 1.0;
    for (double eta = 2.0 / 3.0; eta <= 1.0 + 1e-12; eta += 1.0 / 24.0) {
        const double j = qs::eberhard_optimize(eta, eta).j_min;
        EXPECT_LE(j, prev + 1e-9) << "eta " << eta;
        prev = j;
    }
}

TEST(Eberhard, RejectsZeroEfficiency) { EXPECT_THROW(qs::eberhard_optimize(0.0, 0.5), ValidationError); }
