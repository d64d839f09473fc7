#pragma once

// Vertex representations of the local (LHV), no-signaling (NS) and
// biased-setting polytopes for two parties with binary settings and
// outcomes, plus the maximum-likelihood projection of counts onto NS.

#include <Eigen/Dense>

#include <cmath>
#include <string_view>
#include <vector>

#include "cosmicbell/core.hpp"
#include "cosmicbell/detail/interior_point.hpp"

namespace cosmicbell::polytopes {

enum class VertexKind { LHV, NS, Settings };

constexpr std::string_view to_string(VertexKind k) {
    switch (k) {
        case VertexKind::LHV: return "LHV";
        case VertexKind::NS: return "NS";
        case VertexKind::Settings: return "SETTINGS";
    }
    return "?";
}

template <class Vertex>
struct VertexSet {
    VertexKind kind;
    std::vector<Vertex> vertices;

    std::size_t size() const { return vertices.size(); }
    const Vertex& operator[](std::size_t i) const { return vertices[i]; }
    auto begin() const { return vertices.begin(); }
    auto end() const { return vertices.end(); }
};

/// Deterministic strategy number s = 8 dA(0) + 4 dA(1) + 2 dB(0) + dB(1).
inline Behavior deterministic_behavior(int strategy) {
    const int da[2] = {(strategy >> 3) & 1, (strategy >> 2) & 1};
    const int db[2] = {(strategy >> 1) & 1, strategy & 1};
    CellArray p{};
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) p[cell(da[x], db[y], x, y)] = 1.0;
    return Behavior::unchecked(p);
}

/// PR-box variant v = 4 alpha + 2 beta + gamma: p(ab|xy) = 1/2 iff
/// a xor b = xy xor alpha x xor beta y xor gamma. Variant 0 is the standard PR box.
inline Behavior pr_box(int variant) {
    const int alpha = (variant >> 2) & 1, beta = (variant >> 1) & 1, gamma = variant & 1;
    CellArray p{};
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int a = 0; a < 2; ++a) {
                const int b = a ^ (x & y) ^ (alpha & x) ^ (beta & y) ^ gamma;
                p[cell(a, b, x, y)] = 0.5;
            }
    return Behavior::unchecked(p);
}

/// The 16 deterministic local strategies, ordered by strategy number.
inline VertexSet<Behavior> lhv_vertices() {
    VertexSet<Behavior> set{VertexKind::LHV, {}};
    set.vertices.reserve(16);
    for (int s = 0; s < 16; ++s) set.vertices.push_back(deterministic_behavior(s));
    return set;
}

/// The 16 LHV vertices (same order) followed by the 8 PR-box variants.
inline VertexSet<Behavior> ns_vertices() {
    VertexSet<Behavior> set{VertexKind::NS, lhv_vertices().vertices};
    for (int v = 0; v < 8; ++v) set.vertices.push_back(pr_box(v));
    return set;
}

/// Extreme points of the product setting distributions with bounded bias.
/// Order: qA(0) in {1/2 - epsA, 1/2 + epsA} (outer), qB(0) likewise (inner).
inline VertexSet<JointSettingDistribution> setting_vertices(double eps_a, double eps_b) {
    JointSettingDistribution::check_bias(eps_a);
    JointSettingDistribution::check_bias(eps_b);
    VertexSet<JointSettingDistribution> set{VertexKind::Settings, {}};
    for (double sa : {-1.0, 1.0})
        for (double sb : {-1.0, 1.0})
            set.vertices.emplace_back(0.5 + sa * eps_a, 0.5 + sb * eps_b, eps_a, eps_b);
    return set;
}

/// sum n(abxy) log p(ab|xy) with 0 log p := 0.
inline double log_likelihood(const CountsTable& counts, const Behavior& p) {
    double ll = 0.0;
    for (int c = 0; c < kCells; ++c) {
        if (counts.n[c] == 0) continue;
        ll += static_cast<double>(counts.n[c]) * std::log(p[c]);
    }
    return ll;
}

/// Affine coordinates of the NS polytope: z = (pA(1|0), pA(1|1), pB(1|0), pB(1|1),
/// p(11|00), p(11|01), p(11|10), p(11|11)); returns B, p0 with p = B z + p0.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> ns_coordinates() {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(kCells, 8);
    Eigen::VectorXd p0 = Eigen::VectorXd::Zero(kCells);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            const int s = setting_index(x, y);
            b(cell(1, 1, x, y), 4 + s) = 1.0;
            b(cell(1, 0, x, y), x) = 1.0;
            b(cell(1, 0, x, y), 4 + s) = -1.0;
            b(cell(0, 1, x, y), 2 + y) = 1.0;
            b(cell(0, 1, x, y), 4 + s) = -1.0;
            b(cell(0, 0, x, y), x) = -1.0;
            b(cell(0, 0, x, y), 2 + y) = -1.0;
            b(cell(0, 0, x, y), 4 + s) = 1.0;
            p0[cell(0, 0, x, y)] = 1.0;
        }
    return {b, p0};
}

struct MlFit {
    Behavior behavior;
    double log_likelihood = 0.0;
    int iterations = 0;
};

/// Maximum-likelihood no-signaling behavior for the given counts.
///
/// The likelihood is maximized over the NS polytope written in its eight
/// affine coordinates with the sixteen positivity constraints, which is the
/// same set as the convex hull of ns_vertices().
inline MlFit ml_no_signaling_fit(const CountsTable& counts) {
    const double total = static_cast<double>(counts.total());
    if (total == 0.0) throw ValidationError("ml_no_signaling: all counts are zero");

    auto [b, p0] = ns_coordinates();
    std::vector<int> observed;
    for (int c = 0; c < kCells; ++c)
        if (counts.n[c] > 0) observed.push_back(c);

    detail::LogLinearProblem prob;
    prob.weights.resize(static_cast<Eigen::Index>(observed.size()));
    prob.g.resize(static_cast<Eigen::Index>(observed.size()), 8);
    prob.h.resize(static_cast<Eigen::Index>(observed.size()));
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        prob.weights[r] = static_cast<double>(counts.n[observed[i]]) / total;
        prob.g.row(r) = b.row(observed[i]);
        prob.h[r] = p0[observed[i]];
    }
    prob.c = b;
    prob.e = p0;

    Eigen::VectorXd z0(8);
    z0 << 0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25;
    detail::InteriorPointOptions opt;
    opt.gap_tol = 1e-14;
    const auto sol = detail::solve_log_linear(prob, z0, opt);

    const Eigen::VectorXd p = b * sol.z + p0;
    CellArray arr;
    for (int c = 0; c < kCells; ++c) arr[c] = std::max(p[c], 0.0);
    // Renormalize away rounding so the 1e-12 contract holds exactly.
    for (int s = 0; s < kSettings; ++s) {
        double sum = 0.0;
        for (int ab = 0; ab < 4; ++ab) sum += arr[ab * 4 + s];
        for (int ab = 0; ab < 4; ++ab) arr[ab * 4 + s] /= sum;
    }
    MlFit fit{Behavior::from_array(arr), 0.0, sol.iterations};
    fit.log_likelihood = log_likelihood(counts, fit.behavior);
    return fit;
}

inline Behavior ml_no_signaling(const CountsTable& counts) { return ml_no_signaling_fit(counts).behavior; }

/// Convex combination sum_k w_k v_k of behaviors.
inline Behavior mixture(std::span<const Behavior> vertices, std::span<const double> weights) {
    CellArray p{};
    for (std::size_t k = 0; k < vertices.size(); ++k)
        for (int c = 0; c < kCells; ++c) p[c] += weights[k] * vertices[k][c];
    return Behavior::unchecked(p);
}

}  // namespace cosmicbell::polytopes
