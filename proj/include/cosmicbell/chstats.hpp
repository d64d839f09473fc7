#pragma once

// CH/Eberhard statistic, two-proportion no-signaling tests, setting-bias
// bounds from ratio/SNR monitors, Hoeffding consistency checks and the
// heralding-efficiency budget.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "cosmicbell/core.hpp"

namespace cosmicbell::chstats {

/// J = -p(11|00) - p(11|01) - p(11|10) + p(11|11) + pA(1|0) + pB(1|0).
/// pA(1|0) averages Alice's x=0 marginal over both of Bob's settings with
/// weight 1/2, and symmetrically for pB(1|0).
inline double ch_j(const Behavior& p) {
    const double pa = 0.5 * (p.alice_marginal(1, 0, 0) + p.alice_marginal(1, 0, 1));
    const double pb = 0.5 * (p.bob_marginal(1, 0, 0) + p.bob_marginal(1, 1, 0));
    return -p(1, 1, 0, 0) - p(1, 1, 0, 1) - p(1, 1, 1, 0) + p(1, 1, 1, 1) + pa + pb;
}

/// J from counts; every setting pair needs at least one trial.
inline double ch_j(const CountsTable& counts) { return ch_j(counts.empirical()); }

struct ZTest {
    double z = 0.0;
    double p_value = 1.0;
    bool degenerate = false;  // pooled proportion was 0 or 1
};

/// Pooled two-proportion Z-test with a two-sided normal tail.
inline ZTest two_proportion_ztest(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2, std::uint64_t n2) {
    if (n1 == 0 || n2 == 0) throw ValidationError("two_proportion_ztest: empty sample");
    const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
    const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
    const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
    if (pooled <= 0.0 || pooled >= 1.0) return {0.0, 1.0, true};
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
    const double z = (p1 - p2) / se;
    return {z, std::erfc(std::abs(z) / std::sqrt(2.0)), false};
}

/// The four no-signaling conditions, in order: Alice x=0, Alice x=1 (each
/// compared across Bob's y), Bob y=0, Bob y=1 (each compared across Alice's x).
inline std::array<ZTest, 4> nosignaling_ztests(const CountsTable& n) {
    n.require_all_settings();
    auto alice_ones = [&](int x, int y) { return n(1, 0, x, y) + n(1, 1, x, y); };
    auto bob_ones = [&](int x, int y) { return n(0, 1, x, y) + n(1, 1, x, y); };
    std::array<ZTest, 4> out;
    for (int x = 0; x < 2; ++x)
        out[x] = two_proportion_ztest(alice_ones(x, 0), n.setting_total(x, 0), alice_ones(x, 1), n.setting_total(x, 1));
    for (int y = 0; y < 2; ++y)
        out[2 + y] = two_proportion_ztest(bob_ones(0, y), n.setting_total(0, y), bob_ones(1, y), n.setting_total(1, y));
    return out;
}

/// Ratio of bit-0 to bit-1 frequencies and the on-source signal-to-noise ratio.
struct BiasMonitor {
    double r = 1.0;
    double snr = std::numeric_limits<double>::infinity();
    bool degenerate = false;  // r or snr could not be formed from the data
};

/// Upper bound on |p(x) - 1/2| for a mixture of stellar bits (ratio r) and
/// arbitrary background bits with stellar weight snr / (1 + snr).
inline double bias_estimate(const BiasMonitor& m) {
    if (!(m.r > 0.0) || !(m.snr > 0.0)) throw ValidationError("bias_estimate: r and snr must be positive");
    const double stellar = std::isinf(m.snr) ? 1.0 : m.snr / (1.0 + m.snr);
    const double noise = std::isinf(m.snr) ? 0.0 : 1.0 / (1.0 + m.snr);
    const double pmax = std::isinf(m.r) ? 1.0 : std::max(m.r / (1.0 + m.r), 1.0 / (1.0 + m.r));
    return stellar * pmax + noise - 0.5;
}

struct HoeffdingBound {
    double lower_bound = 0.0;  // 1 - exp(-2 N delta^2), or 0 when delta <= 0
    double log10_tail = 0.0;   // log10(1 - lower_bound); stays finite when 1 - c underflows
};

/// Lower bound on Prob(max_x n(x)/N <= 1/2 + eps) from the observed counts.
inline HoeffdingBound hoeffding_consistency(std::uint64_t n0, std::uint64_t n1, double eps) {
    if (n0 + n1 == 0) throw ValidationError("hoeffding_consistency: no trials");
    const double total = static_cast<double>(n0 + n1);
    const double f = static_cast<double>(std::max(n0, n1)) / total;
    const double delta = (0.5 + eps) - f;
    if (delta <= 0.0) return {0.0, 0.0};
    const double exponent = 2.0 * total * delta * delta;
    return {-std::expm1(-exponent), -exponent / std::log(10.0)};
}

struct EfficiencyBudget {
    double eta_sc = 1.0;     // coupling into single-mode fiber
    double eta_so = 1.0;     // source optics
    double eta_fiber = 1.0;  // source-to-station fiber
    double eta_m = 1.0;      // measurement station
    double eta_det = 1.0;    // detector
};

inline void check_efficiency(double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " must lie in (0, 1]");
}

/// Single-photon heralding efficiency: product of the five factors.
inline double heralding_budget(const EfficiencyBudget& b) {
    check_efficiency(b.eta_sc, "eta_sc");
    check_efficiency(b.eta_so, "eta_so");
    check_efficiency(b.eta_fiber, "eta_fiber");
    check_efficiency(b.eta_m, "eta_m");
    check_efficiency(b.eta_det, "eta_det");
    return b.eta_sc * b.eta_so * b.eta_fiber * b.eta_m * b.eta_det;
}

/// Coupling efficiency implied by a measured heralding efficiency; eta_sc in
/// `others` is ignored.
inline double infer_sc(double eta_total, const EfficiencyBudget& others) {
    const double denom = others.eta_so * others.eta_fiber * others.eta_m * others.eta_det;
    if (denom == 0.0) throw ValidationError("infer_sc: zero efficiency factor in the divisor");
    return eta_total / denom;
}

/// Transmission of a chain of optical elements.
inline double optical_transmission(std::span<const double> elements) {
    double t = 1.0;
    for (double e : elements) {
        check_efficiency(e, "element transmission");
        t *= e;
    }
    return t;
}

}  // namespace cosmicbell::chstats
