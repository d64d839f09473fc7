#pragma once

// Forward model of the entangled-photon Bell test: behavior of the state
// (|HV> + r|VH>)/sqrt(1 + r^2) under single-channel polarization analyzers
// with finite heralding efficiency and accidental clicks, i.i.d. trial
// sampling, and Eberhard's optimization of state and analyzer angles.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "cosmicbell/chstats.hpp"
#include "cosmicbell/core.hpp"

namespace cosmicbell::qsim {

/// Angles in degrees; an analyzer at angle t passes cos t |H> + sin t |V>,
/// and outcome 1 is a click behind it.
struct QuantumModel {
    double r = 1.0;
    std::array<double, 2> angles_a{0.0, 0.0};
    std::array<double, 2> angles_b{0.0, 0.0};
    double eta_a = 1.0;
    double eta_b = 1.0;
    double p_dark = 0.0;

    void validate() const {
        auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in_unit(r)) throw ValidationError("QuantumModel: r must lie in [0, 1]");
        if (!in_unit(eta_a) || !in_unit(eta_b)) throw ValidationError("QuantumModel: efficiencies must lie in [0, 1]");
        if (!in_unit(p_dark)) throw ValidationError("QuantumModel: p_dark must lie in [0, 1]");
        for (double t : angles_a)
            if (!std::isfinite(t)) throw ValidationError("QuantumModel: non-finite angle");
        for (double t : angles_b)
            if (!std::isfinite(t)) throw ValidationError("QuantumModel: non-finite angle");
    }
};

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

namespace model_impl {

// Click probabilities without accidentals.
inline double joint_click(double r, double alpha, double beta, double eta_a, double eta_b) {
    const double amp = std::cos(alpha) * std::sin(beta) + r * std::sin(alpha) * std::cos(beta);
    return eta_a * eta_b * amp * amp / (1.0 + r * r);
}
inline double alice_click(double r, double alpha, double eta) {
    const double c = std::cos(alpha), s = std::sin(alpha);
    return eta * (c * c + r * r * s * s) / (1.0 + r * r);
}
inline double bob_click(double r, double beta, double eta) {
    const double c = std::cos(beta), s = std::sin(beta);
    return eta * (s * s + r * r * c * c) / (1.0 + r * r);
}

}  // namespace model_impl

/// Behavior predicted by the model; accidental clicks are OR-ed in
/// independently on each side with probability p_dark.
inline Behavior model_behavior(const QuantumModel& m) {
    m.validate();
    using namespace model_impl;
    const double keep = 1.0 - m.p_dark;
    CellArray p{};
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            const double alpha = deg2rad(m.angles_a[x]);
            const double beta = deg2rad(m.angles_b[y]);
            const double p11 = joint_click(m.r, alpha, beta, m.eta_a, m.eta_b);
            const double pa = alice_click(m.r, alpha, m.eta_a);
            const double pb = bob_click(m.r, beta, m.eta_b);
            const double p00 = 1.0 - pa - pb + p11;
            // No click on a side survives only if no accidental fires there.
            const double q00 = p00 * keep * keep;
            const double qa0 = (1.0 - pa) * keep;
            const double qb0 = (1.0 - pb) * keep;
            p[cell(0, 0, x, y)] = q00;
            p[cell(0, 1, x, y)] = qa0 - q00;
            p[cell(1, 0, x, y)] = qb0 - q00;
            p[cell(1, 1, x, y)] = 1.0 - qa0 - qb0 + q00;
        }
    for (auto& v : p) v = std::max(v, 0.0);
    return Behavior::unchecked(p);
}

inline double model_j(const QuantumModel& m) { return chstats::ch_j(model_behavior(m)); }

/// Analytic gradient of J (p_dark = 0) with respect to
/// (r, A1, A2, B1, B2); angle derivatives are per degree.
inline std::array<double, 5> j_gradient(const QuantumModel& m) {
    const double r = m.r, n = 1.0 + r * r;
    const double ea = m.eta_a, eb = m.eta_b;
    const double a[2] = {deg2rad(m.angles_a[0]), deg2rad(m.angles_a[1])};
    const double b[2] = {deg2rad(m.angles_b[0]), deg2rad(m.angles_b[1])};
    const double sign[2][2] = {{-1.0, -1.0}, {-1.0, 1.0}};
    const double per_deg = std::numbers::pi / 180.0;

    std::array<double, 5> g{};
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            const double amp = std::cos(a[x]) * std::sin(b[y]) + r * std::sin(a[x]) * std::cos(b[y]);
            const double k = sign[x][y] * ea * eb / n;
            // d/dr of amp^2 / n
            g[0] += sign[x][y] * ea * eb * (2.0 * amp * std::sin(a[x]) * std::cos(b[y]) / n - amp * amp * 2.0 * r / (n * n));
            const double damp_da = -std::sin(a[x]) * std::sin(b[y]) + r * std::cos(a[x]) * std::cos(b[y]);
            const double damp_db = std::cos(a[x]) * std::cos(b[y]) - r * std::sin(a[x]) * std::sin(b[y]);
            g[1 + x] += k * 2.0 * amp * damp_da * per_deg;
            g[3 + y] += k * 2.0 * amp * damp_db * per_deg;
        }
    // Marginal terms pA(1|0) and pB(1|0).
    const double ca = std::cos(a[0]), sa = std::sin(a[0]);
    const double cb = std::cos(b[0]), sb = std::sin(b[0]);
    const double na = ca * ca + r * r * sa * sa, nb = sb * sb + r * r * cb * cb;
    g[0] += ea * (2.0 * r * sa * sa / n - na * 2.0 * r / (n * n));
    g[0] += eb * (2.0 * r * cb * cb / n - nb * 2.0 * r / (n * n));
    g[1] += ea * (r * r - 1.0) * 2.0 * sa * ca / n * per_deg;
    g[3] += eb * (1.0 - r * r) * 2.0 * sb * cb / n * per_deg;
    return g;
}

// ---------------------------------------------------------------------------
// Sampling

/// splitmix64 finalizer; derives independent chunk seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// xoshiro256** with a uniform double in [0, 1) from the top 53 bits; the
/// stream is fully specified so sampled files are reproducible across
/// standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) {
            s = splitmix64(s);
            w = s;
        }
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<std::uint64_t, 4> state_{};
};

inline constexpr std::uint64_t kDefaultChunk = 1u << 20;

/// Cumulative distribution of the trial cell under q(xy) p(ab|xy).
inline std::array<double, kCells> trial_cdf(const Behavior& p, const JointSettingDistribution& q) {
    std::array<double, kCells> cdf{};
    double acc = 0.0;
    for (int c = 0; c < kCells; ++c) {
        const auto [a, b, x, y] = unpack(c);
        acc += q(x, y) * p[c];
        cdf[c] = acc;
    }
    int last = 0;
    for (int c = 0; c < kCells; ++c) {
        const auto [a, b, x, y] = unpack(c);
        if (q(x, y) * p[c] > 0.0) last = c;
        cdf[c] /= acc;
    }
    // Rounding must never route mass into trailing zero-probability cells.
    for (int c = last; c < kCells; ++c) cdf[c] = 1.0;
    return cdf;
}

inline int draw_cell(const std::array<double, kCells>& cdf, double u) {
    int c = 0;
    while (c < kCells - 1 && u >= cdf[c]) ++c;
    return c;
}

/// Calls sink(cell) for n_trials i.i.d. trials. Trials are generated in chunks
/// of `chunk` with chunk k seeded from splitmix64(seed ^ k), so output depends
/// only on (seed, chunk).
template <class Sink>
void sample_cells(const Behavior& p, const JointSettingDistribution& q, std::uint64_t n_trials, std::uint64_t seed,
                  Sink&& sink, std::uint64_t chunk = kDefaultChunk) {
    if (chunk == 0) throw ValidationError("sampling chunk size must be positive");
    const auto cdf = trial_cdf(p, q);
    for (std::uint64_t start = 0, k = 0; start < n_trials; start += chunk, ++k) {
        Rng rng(splitmix64(seed ^ splitmix64(k)));
        const std::uint64_t stop = std::min(n_trials, start + chunk);
        for (std::uint64_t i = start; i < stop; ++i) sink(draw_cell(cdf, rng.uniform()));
    }
}

inline CountsTable simulate_counts(const Behavior& p, const JointSettingDistribution& q, std::uint64_t n_trials,
                                   std::uint64_t seed, std::uint64_t chunk = kDefaultChunk) {
    if (n_trials == 0) throw ValidationError("simulate_counts: n_trials must be positive");
    CountsTable t;
    sample_cells(p, q, n_trials, seed, [&](int c) { ++t.n[c]; }, chunk);
    return t;
}

/// Appends n_trials records for one period, indices continuing from first_index.
inline void simulate_trials(std::vector<TrialRecord>& out, const Behavior& p, const JointSettingDistribution& q,
                            std::uint64_t n_trials, std::uint64_t seed, int period, std::uint64_t first_index,
                            std::uint64_t chunk = kDefaultChunk) {
    if (n_trials == 0) throw ValidationError("simulate_trials: n_trials must be positive");
    out.reserve(out.size() + n_trials);
    std::uint64_t idx = first_index;
    sample_cells(
        p, q, n_trials, seed,
        [&](int c) {
            const auto [a, b, x, y] = unpack(c);
            out.push_back({idx++, period, static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y),
                           static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)});
        },
        chunk);
}

// ---------------------------------------------------------------------------
// Eberhard optimization

struct EberhardResult {
    double r = 0.0;
    std::array<double, 2> angles_a{};
    std::array<double, 2> angles_b{};
    double j_min = 0.0;
    bool violation_found = false;
    int starts = 0;
};

namespace eberhard_impl {

// Unconstrained parameters v = (r, A1, A2, B1, B2); r may leave [0, 1] and is
// mapped back by canonicalize().
inline QuantumModel to_model(const std::array<double, 5>& v, double eta_a, double eta_b) {
    QuantumModel m;
    m.r = v[0];
    m.angles_a = {v[1], v[2]};
    m.angles_b = {v[3], v[4]};
    m.eta_a = eta_a;
    m.eta_b = eta_b;
    return m;
}

inline double j_of(const std::array<double, 5>& v, double eta_a, double eta_b) {
    using namespace model_impl;
    const double r = v[0];
    const double a[2] = {deg2rad(v[1]), deg2rad(v[2])};
    const double b[2] = {deg2rad(v[3]), deg2rad(v[4])};
    return -joint_click(r, a[0], b[0], eta_a, eta_b) - joint_click(r, a[0], b[1], eta_a, eta_b) -
           joint_click(r, a[1], b[0], eta_a, eta_b) + joint_click(r, a[1], b[1], eta_a, eta_b) +
           alice_click(r, a[0], eta_a) + bob_click(r, b[0], eta_b);
}

inline std::array<double, 5> grad_of(const std::array<double, 5>& v, double eta_a, double eta_b) {
    return j_gradient(to_model(v, eta_a, eta_b));
}

/// Wraps t into (lo, lo + 180].
inline double wrap180(double t, double lo) {
    double w = std::fmod(t - lo, 180.0);
    if (w <= 0.0) w += 180.0;
    return lo + w;
}

/// Maps symmetry-equivalent solutions to one branch: r in [0, 1], A1 in
/// (-90, 0], A2 within 90 degrees of A1, B1 in (-90, 90], B2 within 90 of B1.
/// Uses r -> -r with A -> -A, r -> 1/r with t -> 90 - t on both sides,
/// (A, B) -> (-A, -B) and 180-degree shifts of any angle.
inline EberhardResult canonicalize(std::array<double, 5> v) {
    if (v[0] < 0.0) {
        v[0] = -v[0];
        v[1] = -v[1];
        v[2] = -v[2];
    }
    if (v[0] > 1.0) {
        v[0] = 1.0 / v[0];
        for (int i = 1; i < 5; ++i) v[i] = 90.0 - v[i];
    }
    double a1 = wrap180(v[1], -90.0);
    if (a1 > 0.0) {
        for (int i = 1; i < 5; ++i) v[i] = -v[i];
        a1 = wrap180(v[1], -90.0);
    }
    EberhardResult out;
    out.r = v[0];
    out.angles_a[0] = a1;
    out.angles_a[1] = wrap180(v[2], a1 - 90.0);
    out.angles_b[0] = wrap180(v[3], -90.0);
    out.angles_b[1] = wrap180(v[4], out.angles_b[0] - 90.0);
    return out;
}

/// BFGS with Armijo backtracking; returns the final point.
inline std::array<double, 5> bfgs(std::array<double, 5> x, double eta_a, double eta_b, int max_iter = 2000) {
    constexpr int n = 5;
    double hinv[n][n] = {};
    for (int i = 0; i < n; ++i) hinv[i][i] = (i == 0) ? 1e-2 : 100.0;
    double fx = j_of(x, eta_a, eta_b);
    auto g = grad_of(x, eta_a, eta_b);
    for (int it = 0; it < max_iter; ++it) {
        std::array<double, n> d{};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) d[i] -= hinv[i][j] * g[j];
        double slope = 0.0;
        for (int i = 0; i < n; ++i) slope += g[i] * d[i];
        if (slope >= 0.0) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) hinv[i][j] = 0.0;
                hinv[i][i] = (i == 0) ? 1e-2 : 100.0;
                d[i] = -hinv[i][i] * g[i];
            }
            slope = 0.0;
            for (int i = 0; i < n; ++i) slope += g[i] * d[i];
        }
        if (-slope < 1e-30) break;
        double step = 1.0;
        std::array<double, n> xn{};
        double fn = fx;
        for (int ls = 0; ls < 60; ++ls) {
            for (int i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
            fn = j_of(xn, eta_a, eta_b);
            if (fn <= fx + 1e-4 * step * slope) break;
            step *= 0.5;
        }
        if (!(fn <= fx)) break;
        const auto gn = grad_of(xn, eta_a, eta_b);
        std::array<double, n> s{}, y{};
        for (int i = 0; i < n; ++i) {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        double sy = 0.0;
        for (int i = 0; i < n; ++i) sy += s[i] * y[i];
        const bool done = std::abs(fx - fn) <= 1e-16 * (1.0 + std::abs(fx));
        x = xn;
        fx = fn;
        g = gn;
        if (done) break;
        if (sy > 1e-300) {
            std::array<double, n> hy{};
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) hy[i] += hinv[i][j] * y[j];
            double yhy = 0.0;
            for (int i = 0; i < n; ++i) yhy += y[i] * hy[i];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    hinv[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
    }
    return x;
}

}  // namespace eberhard_impl

/// Minimizes J over r and the four analyzer angles (p_dark = 0) by BFGS from
/// a fixed multi-start grid: r0 in {0.2, 0.5, 0.9}, A1, B1 on a 30-degree
/// grid, A2 = A1 - 30, B2 = B1 - 30.
inline EberhardResult eberhard_optimize(double eta_a, double eta_b) {
    if (!(eta_a > 0.0 && eta_a <= 1.0) || !(eta_b > 0.0 && eta_b <= 1.0))
        throw ValidationError("eberhard_optimize: efficiencies must lie in (0, 1]");
    std::array<double, 5> best{};
    double best_j = std::numeric_limits<double>::infinity();
    int starts = 0;
    for (double r0 : {0.2, 0.5, 0.9})
        for (int a = -180; a < 180; a += 30)
            for (int b = -180; b < 180; b += 30) {
                const std::array<double, 5> x0{r0, double(a), double(a - 30), double(b), double(b - 30)};
                const auto x = eberhard_impl::bfgs(x0, eta_a, eta_b);
                const double j = eberhard_impl::j_of(x, eta_a, eta_b);
                ++starts;
                if (j < best_j) {
                    best_j = j;
                    best = x;
                }
            }
    auto out = eberhard_impl::canonicalize(best);
    out.j_min = model_j(QuantumModel{out.r, out.angles_a, out.angles_b, eta_a, eta_b, 0.0});
    out.violation_found = out.j_min < 0.0;
    out.starts = starts;
    return out;
}

}  // namespace cosmicbell::qsim
