#include "odgarch/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace odgarch {

BfgsResult minimize_bfgs(const DifferentiableFn& f, const Eigen::VectorXd& x0, const BfgsOptions& options) {
    const Eigen::Index k = x0.size();
    BfgsResult res;
    res.x = x0;
    res.grad.resize(k);
    res.value = f(res.x, &res.grad);
    if (!std::isfinite(res.value) || !res.grad.allFinite()) return res;

    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(k, k);
    bool fresh = true;
    Eigen::VectorXd g_new(k);
    for (int it = 0; it < options.max_iter; ++it) {
        if (res.grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
            res.converged = true;
            return res;
        }
        Eigen::VectorXd dir = -h * res.grad;
        double slope = res.grad.dot(dir);
        if (!(slope < 0.0)) {
            h.setIdentity();
            fresh = true;
            dir = -res.grad;
            slope = -res.grad.squaredNorm();
        }
        double t = 1.0;
        const double len = dir.lpNorm<Eigen::Infinity>();
        if (len * t > options.max_step) t = options.max_step / len;

        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = 0.0;
        for (int bt = 0; bt < options.max_backtracks; ++bt) {
            x_new = res.x + t * dir;
            f_new = f(x_new, nullptr);
            if (std::isfinite(f_new) && f_new <= res.value + options.armijo_c * t * slope) {
                accepted = true;
                break;
            }
            t *= options.backtrack;
        }
        ++res.iterations;
        if (!accepted) {
            if (fresh) return res;  // steepest descent failed as well
            h.setIdentity();
            fresh = true;
            continue;
        }
        f_new = f(x_new, &g_new);
        if (!std::isfinite(f_new) || !g_new.allFinite()) return res;

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd yv = g_new - res.grad;
        const double sy = s.dot(yv);
        res.x = x_new;
        res.value = f_new;
        res.grad = g_new;
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (fresh) {
                // Shanno–Phua scaling of the initial inverse Hessian.
                h *= sy / yv.squaredNorm();
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = h * yv;
            h += (rho * rho * yv.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
            fresh = false;
        }
    }
    res.converged = res.grad.lpNorm<Eigen::Infinity>() < options.grad_tol;
    return res;
}

AugLagResult minimize_auglag(const DifferentiableFn& objective, const DifferentiableFn& constraint,
                             const Eigen::VectorXd& x0, const AugLagOptions& options) {
    AugLagResult out;
    out.x = x0;
    double lambda = 0.0;
    double mu = options.penalty0;
    const Eigen::Index k = x0.size();

    for (int outer = 0; outer < options.max_outer; ++outer) {
        const DifferentiableFn merit = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
            Eigen::VectorXd gf(k);
            Eigen::VectorXd gc(k);
            const double fv = objective(x, grad ? &gf : nullptr);
            const double cv = constraint(x, grad ? &gc : nullptr);
            if (!std::isfinite(fv) || !std::isfinite(cv)) return std::numeric_limits<double>::infinity();
            const double shifted = std::max(0.0, lambda + mu * cv);
            if (grad) *grad = gf + shifted * gc;
            return fv + (shifted * shifted - lambda * lambda) / (2.0 * mu);
        };
        const BfgsResult inner = minimize_bfgs(merit, out.x, options.inner);
        out.x = inner.x;
        out.n_outer = outer + 1;
        out.n_inner += inner.iterations;

        Eigen::VectorXd gf(k);
        Eigen::VectorXd gc(k);
        out.objective = objective(out.x, &gf);
        out.constraint = constraint(out.x, &gc);
        out.outer_objective.push_back(out.objective);

        const double lambda_new = std::max(0.0, lambda + mu * out.constraint);
        const double violation = std::max(0.0, out.constraint);
        const double complementarity = std::fabs(std::min(-out.constraint, lambda_new));
        out.multiplier = lambda_new;
        out.kkt_norm = (gf + lambda_new * gc).lpNorm<Eigen::Infinity>();
        if (violation <= options.feas_tol && complementarity <= options.feas_tol &&
            out.kkt_norm < options.kkt_tol) {
            out.converged = true;
            break;
        }
        // Same subproblem next round and the last restart gained nothing: stop.
        const bool same_subproblem = lambda_new == lambda && violation <= options.feas_tol;
        const std::size_t rounds = out.outer_objective.size();
        if (same_subproblem && rounds >= 2 &&
            out.outer_objective[rounds - 2] - out.objective <= 1e-12 * (1.0 + std::fabs(out.objective))) {
            break;
        }
        lambda = lambda_new;
        if (violation > options.feas_tol) mu *= options.penalty_growth;
    }
    return out;
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step) {
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const double up = f(probe);
        probe[i] = x[i] - step;
        const double down = f(probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

}  // namespace odgarch
