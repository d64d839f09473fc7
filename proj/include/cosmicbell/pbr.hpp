#pragma once

// Prediction-based-ratio (PBR) construction and blocked p-value accumulation.
//
// A PBR is a nonnegative score R(abxy) whose expectation is at most 1 under
// every distribution q(xy) d(ab|xy) with q a setting vertex and d a vertex of
// the null polytope. The inverse running product of observed scores is a
// valid p-value bound even when the null model adapts to earlier trials.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cosmicbell/core.hpp"
#include "cosmicbell/detail/interior_point.hpp"
#include "cosmicbell/polytopes.hpp"

namespace cosmicbell::pbr {

enum class Hypothesis { LHV, NS };

constexpr std::string_view to_string(Hypothesis h) { return h == Hypothesis::LHV ? "LHV" : "NS"; }

inline Hypothesis parse_hypothesis(std::string_view s) {
    if (s == "LHV" || s == "lhv") return Hypothesis::LHV;
    if (s == "NS" || s == "ns") return Hypothesis::NS;
    throw ValidationError("unknown hypothesis '" + std::string(s) + "'");
}

inline constexpr double kSmoothing = 1e-9;
inline constexpr double kTrivialGain = 1e-12;
inline constexpr double kConstraintSlack = 1e-9;

struct PbrFunction {
    CellArray r{};

    static PbrFunction trivial() {
        PbrFunction f;
        f.r.fill(1.0);
        return f;
    }

    double operator()(int a, int b, int x, int y) const { return r[cell(a, b, x, y)]; }
    double operator[](int c) const { return r[c]; }
    bool is_trivial() const {
        return std::all_of(r.begin(), r.end(), [](double v) { return v == 1.0; });
    }
};

/// Rows q(xy) d(ab|xy) for every (null vertex, setting vertex) pair:
/// 64 rows for LHV, 96 for NS. Setting vertex is the outer loop.
inline std::vector<CellArray> constraint_rows(Hypothesis h, double eps_a, double eps_b) {
    const auto nulls = h == Hypothesis::LHV ? polytopes::lhv_vertices() : polytopes::ns_vertices();
    const auto settings = polytopes::setting_vertices(eps_a, eps_b);
    std::vector<CellArray> rows;
    rows.reserve(nulls.size() * settings.size());
    for (const auto& q : settings) {
        const CellArray qc = q.over_cells();
        for (const auto& d : nulls) {
            CellArray row;
            for (int c = 0; c < kCells; ++c) row[c] = qc[c] * d[c];
            rows.push_back(row);
        }
    }
    return rows;
}

/// max over vertex pairs of sum q d R; a valid PBR keeps this <= 1.
inline double max_null_expectation(const PbrFunction& f, Hypothesis h, double eps_a, double eps_b) {
    double worst = 0.0;
    for (const auto& row : constraint_rows(h, eps_a, eps_b)) {
        double v = 0.0;
        for (int c = 0; c < kCells; ++c) v += row[c] * f.r[c];
        worst = std::max(worst, v);
    }
    return worst;
}

/// Expected log-score sum q(xy) p(ab|xy) log R(abxy); -infinity when R
/// vanishes on a cell of positive probability.
inline double gain_rate(const PbrFunction& f, const Behavior& p, const JointSettingDistribution& q) {
    double g = 0.0;
    for (int c = 0; c < kCells; ++c) {
        const auto [a, b, x, y] = unpack(c);
        const double w = q(x, y) * p[c];
        if (w == 0.0) continue;
        if (f.r[c] <= 0.0) return -std::numeric_limits<double>::infinity();
        g += w * std::log(f.r[c]);
    }
    return g;
}

struct PbrFit {
    PbrFunction pbr;
    double gain = 0.0;        // gain of the returned function at p_est, uniform settings
    double dual_bound = 0.0;  // upper bound on the optimal gain (smoothed objective)
    int iterations = 0;
};

/// Gain-optimal PBR for the estimated behavior under uniform settings,
/// constrained at every null/setting vertex pair.
inline PbrFit fit_pbr(const Behavior& p_est, double eps_a, double eps_b, Hypothesis h) {
    JointSettingDistribution::check_bias(eps_a);
    JointSettingDistribution::check_bias(eps_b);
    Behavior::from_array(p_est.values(), 1e-9);

    const Behavior smoothed = p_est.mixed_with(Behavior::uniform(), kSmoothing);
    const auto rows = constraint_rows(h, eps_a, eps_b);
    const auto k = static_cast<Eigen::Index>(rows.size());

    detail::LogLinearProblem prob;
    prob.weights.resize(kCells);
    for (int c = 0; c < kCells; ++c) prob.weights[c] = 0.25 * smoothed[c];
    prob.g = Eigen::MatrixXd::Identity(kCells, kCells);
    prob.h = Eigen::VectorXd::Zero(kCells);
    prob.c.resize(k, kCells);
    for (Eigen::Index i = 0; i < k; ++i)
        for (int c = 0; c < kCells; ++c) prob.c(i, c) = -rows[static_cast<std::size_t>(i)][c];
    prob.e = Eigen::VectorXd::Ones(k);

    const auto sol = detail::solve_log_linear(prob, Eigen::VectorXd::Constant(kCells, 0.5));

    // Scale onto the binding constraint so every vertex pair satisfies sum q d R <= 1.
    const double worst = (-prob.c * sol.z).maxCoeff();
    PbrFit fit;
    for (int c = 0; c < kCells; ++c) fit.pbr.r[c] = std::max(sol.z[c], 0.0) / worst;

    const Eigen::VectorXd lambda = sol.multipliers / sol.multipliers.sum();
    const Eigen::VectorXd mix = -prob.c.transpose() * lambda;
    fit.dual_bound = 0.0;
    for (int c = 0; c < kCells; ++c) fit.dual_bound += prob.weights[c] * std::log(prob.weights[c] / mix[c]);
    fit.iterations = sol.iterations;

    fit.gain = gain_rate(fit.pbr, p_est, JointSettingDistribution{});
    if (!(fit.gain > kTrivialGain)) {
        fit.pbr = PbrFunction::trivial();
        fit.gain = 0.0;
    }
    return fit;
}

inline PbrFunction build_pbr(const Behavior& p_est, double eps_a, double eps_b, Hypothesis h) {
    return fit_pbr(p_est, eps_a, eps_b, h).pbr;
}

/// min(exp(-log_sum), 1)
inline double pvalue_bound(double log_sum) { return log_sum <= 0.0 ? 1.0 : std::exp(-log_sum); }

struct PeriodBias {
    double eps_a = 0.0;
    double eps_b = 0.0;
};

struct Block {
    std::size_t begin = 0;  // position in the trial stream, inclusive
    std::size_t end = 0;    // exclusive
    int period = 0;
};

struct BlockPlan {
    std::vector<Block> blocks;
    std::map<int, PeriodBias> biases;

    /// Blocks must tile [0, n_trials) in order.
    void validate(std::size_t n_trials) const {
        std::size_t next = 0;
        for (const auto& b : blocks) {
            if (b.begin != next || b.end <= b.begin)
                throw ValidationError("block plan is not contiguous at trial position " + std::to_string(b.begin));
            if (!biases.contains(b.period))
                throw ValidationError("block references unknown period " + std::to_string(b.period));
            next = b.end;
        }
        if (next != n_trials)
            throw ValidationError("block plan covers " + std::to_string(next) + " trials, stream has " +
                                  std::to_string(n_trials));
    }
};

/// Splits each run of same-period trials into `blocks_per_period[period]`
/// near-equal blocks (default: one block per `block_size` trials, at least one).
inline BlockPlan make_block_plan(std::span<const TrialRecord> trials, const std::map<int, PeriodBias>& biases,
                                 std::size_t block_size, const std::map<int, int>& blocks_per_period = {}) {
    if (block_size == 0 && blocks_per_period.empty()) throw ValidationError("block size must be positive");
    BlockPlan plan;
    plan.biases = biases;
    std::size_t i = 0;
    while (i < trials.size()) {
        const int period = trials[i].period;
        if (!biases.contains(period)) throw ValidationError("trial stream references unknown period " + std::to_string(period));
        std::size_t j = i;
        while (j < trials.size() && trials[j].period == period) ++j;
        const std::size_t len = j - i;
        std::size_t nblocks = 0;
        if (auto it = blocks_per_period.find(period); it != blocks_per_period.end()) {
            if (it->second <= 0) throw ValidationError("period " + std::to_string(period) + " needs at least one block");
            nblocks = std::min<std::size_t>(static_cast<std::size_t>(it->second), len);
        } else {
            nblocks = std::max<std::size_t>(1, (len + block_size / 2) / block_size);
        }
        for (std::size_t k = 0; k < nblocks; ++k)
            plan.blocks.push_back({i + len * k / nblocks, i + len * (k + 1) / nblocks, period});
        i = j;
    }
    return plan;
}

struct BlockResult {
    int period = 0;
    std::size_t begin = 0, end = 0;
    bool trivial = true;
    double gain_estimate = 0.0;     // predicted gain rate of the block's PBR
    double log_contribution = 0.0;  // sum of log R over the block's trials
};

struct AnalysisResult {
    double p_value_bound = 1.0;
    double log_product = 0.0;          // sum log R_i, may be negative
    double total_log_inverse_p = 0.0;  // max(log_product, 0)
    std::vector<BlockResult> per_block;
};

/// Runs the blocked PBR test. The first block of each period uses R = 1;
/// every later block uses the PBR built from the ML no-signaling fit of the
/// immediately preceding block of the same period.
inline AnalysisResult run_blocked(std::span<const TrialRecord> trials, const BlockPlan& plan, Hypothesis h) {
    plan.validate(trials.size());
    for (std::size_t i = 1; i < trials.size(); ++i)
        if (trials[i].index <= trials[i - 1].index)
            throw ValidationError("trial stream out of order at index " + std::to_string(trials[i].index));

    AnalysisResult out;
    std::map<int, CountsTable> previous;  // last completed block per period
    for (const auto& block : plan.blocks) {
        for (std::size_t i = block.begin; i < block.end; ++i)
            if (trials[i].period != block.period)
                throw ValidationError("trial " + std::to_string(trials[i].index) + " belongs to period " +
                                      std::to_string(trials[i].period) + " but its block is period " +
                                      std::to_string(block.period));

        BlockResult br{block.period, block.begin, block.end, true, 0.0, 0.0};
        PbrFunction f = PbrFunction::trivial();
        if (auto it = previous.find(block.period); it != previous.end()) {
            const auto bias = plan.biases.at(block.period);
            const auto fit = fit_pbr(polytopes::ml_no_signaling(it->second), bias.eps_a, bias.eps_b, h);
            f = fit.pbr;
            br.trivial = f.is_trivial();
            br.gain_estimate = fit.gain;
        }
        CountsTable block_counts;
        for (std::size_t i = block.begin; i < block.end; ++i) ++block_counts.n[trials[i].cell_index()];
        if (!br.trivial) {
            for (int c = 0; c < kCells; ++c)
                if (block_counts.n[c] > 0) br.log_contribution += static_cast<double>(block_counts.n[c]) * std::log(f.r[c]);
        }
        out.log_product += br.log_contribution;
        out.per_block.push_back(br);
        previous[block.period] = block_counts;
    }
    out.total_log_inverse_p = std::max(out.log_product, 0.0);
    out.p_value_bound = pvalue_bound(out.log_product);
    return out;
}

}  // namespace cosmicbell::pbr
