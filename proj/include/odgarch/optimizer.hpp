#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace odgarch {

/// f(x), writing the gradient into *grad when grad is non-null. Non-finite
/// values mark infeasible points and are rejected by the line search.
using DifferentiableFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BfgsOptions {
    int max_iter = 500;
    double grad_tol = 1e-7;   ///< stop when ||grad||_inf falls below this
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 60;
    double max_step = 1.0;    ///< cap on ||step||_inf of the first trial point
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd grad;
    int iterations = 0;
    bool converged = false;
};

/// Quasi-Newton minimization with inverse-Hessian BFGS updates and Armijo backtracking.
BfgsResult minimize_bfgs(const DifferentiableFn& f, const Eigen::VectorXd& x0, const BfgsOptions& options = {});

struct AugLagOptions {
    double penalty0 = 10.0;
    double penalty_growth = 10.0;
    int max_outer = 20;
    double feas_tol = 1e-8;
    double kkt_tol = 1e-6;
    BfgsOptions inner;
};

struct AugLagResult {
    Eigen::VectorXd x;
    double objective = 0.0;
    double constraint = 0.0;
    double multiplier = 0.0;
    double kkt_norm = 0.0;  ///< ||grad f + multiplier grad c||_inf at x
    int n_outer = 0;
    int n_inner = 0;
    bool converged = false;
    std::vector<double> outer_objective;
};

/**
 * Minimizes f subject to a single inequality c(x) <= 0 with the
 * Powell–Hestenes–Rockafellar augmented Lagrangian
 *
 *   f(x) + (max(0, lambda + mu c(x))^2 - lambda^2) / (2 mu).
 *
 * After each inner solve the multiplier is updated to max(0, lambda + mu c);
 * the penalty grows by `penalty_growth` while the violation exceeds
 * `feas_tol`. Converged means violation and complementarity below
 * `feas_tol` and a KKT residual below `kkt_tol`.
 */
AugLagResult minimize_auglag(const DifferentiableFn& objective, const DifferentiableFn& constraint,
                             const Eigen::VectorXd& x0, const AugLagOptions& options = {});

/// Central-difference gradient of a scalar function.
Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step);

}  // namespace odgarch
