#pragma once

// Core value types shared by every module: trial-cell indexing, behaviors,
// setting distributions, count tables and the error hierarchy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace cosmicbell {

/// Thrown when an input violates a documented precondition or schema.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Thrown when an iterative solver exhausts its iteration cap.
class ConvergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kCells = 16;
inline constexpr int kSettings = 4;
inline constexpr double kNormTol = 1e-12;

/// Flat index of the trial result (a, b, x, y); every 16-entry table uses it.
constexpr int cell(int a, int b, int x, int y) { return ((a * 2 + b) * 2 + x) * 2 + y; }
constexpr int setting_index(int x, int y) { return x * 2 + y; }

struct CellBits {
    int a, b, x, y;
};
constexpr CellBits unpack(int c) { return {(c >> 3) & 1, (c >> 2) & 1, (c >> 1) & 1, c & 1}; }

using CellArray = std::array<double, kCells>;

/// Conditional outcome distribution p(ab|xy).
class Behavior {
  public:
    Behavior() = default;

    /// Validates positivity and per-setting normalization.
    static Behavior from_array(const CellArray& p, double tol = kNormTol) {
        for (int c = 0; c < kCells; ++c) {
            if (!(p[c] >= -tol) || !std::isfinite(p[c]))
                throw ValidationError("behavior entry " + std::to_string(c) + " is negative or not finite");
        }
        for (int s = 0; s < kSettings; ++s) {
            double sum = 0.0;
            for (int ab = 0; ab < 4; ++ab) sum += p[ab * 4 + s];
            if (std::abs(sum - 1.0) > tol)
                throw ValidationError("behavior is not normalized for setting " + std::to_string(s));
        }
        Behavior b;
        for (int c = 0; c < kCells; ++c) b.p_[c] = std::max(p[c], 0.0);
        return b;
    }

    /// Builds a behavior without checks; used for vertices built by construction.
    static Behavior unchecked(const CellArray& p) {
        Behavior b;
        b.p_ = p;
        return b;
    }

    static Behavior uniform() {
        CellArray p;
        p.fill(0.25);
        return unchecked(p);
    }

    double operator()(int a, int b, int x, int y) const { return p_[cell(a, b, x, y)]; }
    double operator[](int c) const { return p_[c]; }
    const CellArray& values() const { return p_; }

    /// p^A(a|x) computed with Bob's setting y.
    double alice_marginal(int a, int x, int y) const { return p_[cell(a, 0, x, y)] + p_[cell(a, 1, x, y)]; }
    double bob_marginal(int b, int x, int y) const { return p_[cell(0, b, x, y)] + p_[cell(1, b, x, y)]; }

    /// Largest violation of the four no-signaling equalities.
    double signaling() const {
        double worst = 0.0;
        for (int x = 0; x < 2; ++x) worst = std::max(worst, std::abs(alice_marginal(1, x, 0) - alice_marginal(1, x, 1)));
        for (int y = 0; y < 2; ++y) worst = std::max(worst, std::abs(bob_marginal(1, 0, y) - bob_marginal(1, 1, y)));
        return worst;
    }

    /// (1 - weight) * this + weight * other.
    Behavior mixed_with(const Behavior& other, double weight) const {
        CellArray p;
        for (int c = 0; c < kCells; ++c) p[c] = (1.0 - weight) * p_[c] + weight * other.p_[c];
        return unchecked(p);
    }

    friend bool operator==(const Behavior&, const Behavior&) = default;

  private:
    CellArray p_{};
};

/// Product setting distribution q(xy) = qA(x) qB(y) with declared bias bounds.
class JointSettingDistribution {
  public:
    JointSettingDistribution() : JointSettingDistribution(0.5, 0.5, 0.0, 0.0) {}

    JointSettingDistribution(double qa0, double qb0, double eps_a, double eps_b) : eps_a_(eps_a), eps_b_(eps_b) {
        check_bias(eps_a);
        check_bias(eps_b);
        if (std::abs(qa0 - 0.5) > eps_a + 1e-15 || std::abs(qb0 - 0.5) > eps_b + 1e-15)
            throw ValidationError("setting marginal lies outside its declared bias bound");
        const double qa[2] = {qa0, 1.0 - qa0};
        const double qb[2] = {qb0, 1.0 - qb0};
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y) q_[setting_index(x, y)] = qa[x] * qb[y];
        qa0_ = qa0;
        qb0_ = qb0;
    }

    /// Product distribution whose marginals define the bias exactly.
    static JointSettingDistribution from_marginals(double qa0, double qb0) {
        return {qa0, qb0, std::abs(qa0 - 0.5), std::abs(qb0 - 0.5)};
    }

    static void check_bias(double eps) {
        if (!(eps >= 0.0 && eps < 0.5)) throw ValidationError("bias must lie in [0, 1/2), got " + std::to_string(eps));
    }

    double operator()(int x, int y) const { return q_[setting_index(x, y)]; }
    const std::array<double, kSettings>& values() const { return q_; }
    double alice0() const { return qa0_; }
    double bob0() const { return qb0_; }
    double eps_a() const { return eps_a_; }
    double eps_b() const { return eps_b_; }

    /// q(xy) expanded over the 16 trial cells.
    CellArray over_cells() const {
        CellArray out;
        for (int c = 0; c < kCells; ++c) {
            const auto [a, b, x, y] = unpack(c);
            out[c] = q_[setting_index(x, y)];
        }
        return out;
    }

  private:
    std::array<double, kSettings> q_{};
    double qa0_ = 0.5, qb0_ = 0.5;
    double eps_a_ = 0.0, eps_b_ = 0.0;
};

/// Trial counts n(abxy), optionally tagged with a period id.
struct CountsTable {
    std::array<std::uint64_t, kCells> n{};
    std::optional<int> period;

    std::uint64_t& operator()(int a, int b, int x, int y) { return n[cell(a, b, x, y)]; }
    std::uint64_t operator()(int a, int b, int x, int y) const { return n[cell(a, b, x, y)]; }

    std::uint64_t setting_total(int x, int y) const {
        std::uint64_t s = 0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) s += n[cell(a, b, x, y)];
        return s;
    }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto v : n) s += v;
        return s;
    }

    void require_all_settings() const {
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y)
                if (setting_total(x, y) == 0)
                    throw ValidationError("setting (" + std::to_string(x) + "," + std::to_string(y) + ") has no trials");
    }

    /// Empirical conditional frequencies n(abxy) / N_xy.
    Behavior empirical() const {
        require_all_settings();
        CellArray p;
        for (int c = 0; c < kCells; ++c) {
            const auto [a, b, x, y] = unpack(c);
            p[c] = static_cast<double>(n[c]) / static_cast<double>(setting_total(x, y));
        }
        return Behavior::unchecked(p);
    }

    CountsTable& operator+=(const CountsTable& o) {
        for (int c = 0; c < kCells; ++c) n[c] += o.n[c];
        return *this;
    }

    friend bool operator==(const CountsTable&, const CountsTable&) = default;
};

/// One Bell-test trial.
struct TrialRecord {
    std::uint64_t index = 0;
    int period = 0;
    std::uint8_t x = 0, y = 0, a = 0, b = 0;

    int cell_index() const { return cell(a, b, x, y); }
    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

inline CountsTable count_trials(std::span<const TrialRecord> trials) {
    CountsTable t;
    for (const auto& r : trials) ++t.n[r.cell_index()];
    return t;
}

}  // namespace cosmicbell
