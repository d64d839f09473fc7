#pragma once

// Primal-dual interior-point solver for log-linear objectives:
//
//   maximize   sum_i w_i log(u_i),   u = G z + h
//   subject to s = C z + e >= 0
//
// Both the maximum-likelihood no-signaling fit and the PBR construction
// reduce to this form. Problems here have at most a few dozen variables,
// so every Newton step is a dense LDLT solve.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cosmicbell/core.hpp"

namespace cosmicbell::detail {

struct LogLinearProblem {
    Eigen::VectorXd weights;  // w, nonnegative
    Eigen::MatrixXd g;        // rows map z to the log arguments
    Eigen::VectorXd h;
    Eigen::MatrixXd c;        // rows map z to the slack constraints (may have zero rows)
    Eigen::VectorXd e;
};

struct InteriorPointOptions {
    double gap_tol = 1e-15;       // complementarity s'lambda
    double residual_tol = 1e-9;   // stationarity, log-term complementarity and primal feasibility (inf-norm)
    double centering = 0.1;
    double boundary_fraction = 0.99;
    int max_iterations = 500;
};

struct InteriorPointResult {
    Eigen::VectorXd z;
    Eigen::VectorXd multipliers;  // lambda, one per constraint row
    double objective = 0.0;
    double complementarity = 0.0;
    int iterations = 0;
};

inline double log_linear_objective(const LogLinearProblem& prob, const Eigen::VectorXd& z) {
    const Eigen::VectorXd u = prob.g * z + prob.h;
    double f = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i)
        if (prob.weights[i] > 0.0) f += prob.weights[i] * std::log(u[i]);
    return f;
}

namespace ip_impl {

/// Largest step in (0, 1] keeping v + step * dv strictly positive.
inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double fraction) {
    double step = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) step = std::min(step, -fraction * v[i] / dv[i]);
    return step;
}

}  // namespace ip_impl

/// Solves the problem starting from a strictly feasible z0 (u > 0, s > 0).
///
/// Each log term gets its own dual v_i with u_i v_i = w_i, so cells whose
/// argument collapses early recover at the same rate as the constraint pairs.
inline InteriorPointResult solve_log_linear(const LogLinearProblem& prob, Eigen::VectorXd z0,
                                            const InteriorPointOptions& opt = {}) {
    const Eigen::Index m = prob.c.rows();
    if ((prob.weights.array() <= 0.0).any()) throw ValidationError("interior-point weights must be positive");
    Eigen::VectorXd z = std::move(z0);
    Eigen::VectorXd u = prob.g * z + prob.h;
    Eigen::VectorXd s = prob.c * z + prob.e;
    if ((u.array() <= 0.0).any() || (m > 0 && (s.array() <= 0.0).any()))
        throw ValidationError("interior-point start is not strictly feasible");
    Eigen::VectorXd v = prob.weights.cwiseQuotient(u);
    Eigen::VectorXd lambda = Eigen::VectorXd::Ones(m);

    InteriorPointResult out;
    for (int it = 0;; ++it) {
        const Eigen::VectorXd r_dual = prob.g.transpose() * v + prob.c.transpose() * lambda;
        const Eigen::VectorXd r_primal = prob.c * z + prob.e - s;
        const double gap = m > 0 ? s.dot(lambda) : 0.0;
        const double r_comp = (u.cwiseProduct(v) - prob.weights).lpNorm<Eigen::Infinity>();

        const bool feasible = r_dual.lpNorm<Eigen::Infinity>() <= opt.residual_tol && r_comp <= opt.residual_tol &&
                              (m == 0 || r_primal.lpNorm<Eigen::Infinity>() <= opt.residual_tol);
        if (feasible && gap <= opt.gap_tol) {
            out.iterations = it;
            break;
        }
        if (it == opt.max_iterations)
            throw ConvergenceError("interior-point solver hit its iteration cap (" + std::to_string(opt.max_iterations) +
                                   ")");

        const double mu = m > 0 ? opt.centering * gap / static_cast<double>(m) : 0.0;
        Eigen::MatrixXd hess = prob.g.transpose() * v.cwiseQuotient(u).asDiagonal() * prob.g;
        Eigen::VectorXd rhs = prob.g.transpose() * prob.weights.cwiseQuotient(u);
        if (m > 0) {
            hess += prob.c.transpose() * lambda.cwiseQuotient(s).asDiagonal() * prob.c;
            rhs += prob.c.transpose() * (Eigen::VectorXd::Constant(m, mu) - lambda.cwiseProduct(r_primal)).cwiseQuotient(s);
        }
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        const Eigen::VectorXd dz = ldlt.solve(rhs);
        if (ldlt.info() != Eigen::Success || !dz.allFinite()) {
            // Near the optimum lambda/s can overflow the pivots; accept a point that is already tight.
            if (feasible && gap <= 1e3 * opt.gap_tol) {
                out.iterations = it;
                break;
            }
            throw ConvergenceError("interior-point Newton system is singular");
        }

        const Eigen::VectorXd du = prob.g * dz;
        const Eigen::VectorXd dv = (prob.weights - u.cwiseProduct(v) - v.cwiseProduct(du)).cwiseQuotient(u);
        double step_p = ip_impl::max_step(u, du, opt.boundary_fraction);
        double step_d = ip_impl::max_step(v, dv, opt.boundary_fraction);
        Eigen::VectorXd ds, dl;
        if (m > 0) {
            ds = prob.c * dz + r_primal;
            dl = (Eigen::VectorXd::Constant(m, mu) - s.cwiseProduct(lambda) - lambda.cwiseProduct(ds)).cwiseQuotient(s);
            step_p = std::min(step_p, ip_impl::max_step(s, ds, opt.boundary_fraction));
            step_d = std::min(step_d, ip_impl::max_step(lambda, dl, opt.boundary_fraction));
        }
        z += step_p * dz;
        u = prob.g * z + prob.h;
        v += step_d * dv;
        if (m > 0) {
            s += step_p * ds;
            lambda += step_d * dl;
        }
        out.iterations = it + 1;
    }

    out.z = z;
    out.multipliers = lambda;
    out.objective = log_linear_objective(prob, z);
    out.complementarity = m > 0 ? s.dot(lambda) : 0.0;
    return out;
}

}  // namespace cosmicbell::detail
