#pragma once

#include "odgarch/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>

namespace odgarch {

/**
 * @brief States visited by the conditional filter.
 *
 * Row k of `u` (0-based) is u_{k+1} = f_{y_{1:k}}(x1), so u.row(0) == x1.
 * For NBIN, row k of `du` is the sensitivity of u_{k+1} to (omega, a, b).
 */
struct FilterTrace {
    Eigen::MatrixXd u;
    std::optional<Eigen::MatrixXd> du;
    State x1;
};

struct LoglikValue {
    double value = 0.0;  ///< normalized by 1/n
    std::size_t n = 0;
    State x1;
};

/// psi_{y_p} o ... o psi_{y_1}(x). An empty slice returns x.
State iterate_f(const ModelParams& params, const State& x, std::span<const double> y);

/// Throws std::invalid_argument for an empty series.
FilterTrace filter(const ModelParams& params, const State& x1, std::span<const double> y);

/// (1/n) sum_k ln g(u_k; y_k).
LoglikValue loglik(const ModelParams& params, const State& x1, std::span<const double> y);

/**
 * Same value as loglik() without input validation, returning -inf instead of
 * throwing when the path leaves the domain. Used on optimizer hot paths.
 */
double loglik_unchecked(const ModelParams& params, const State& x1, std::span<const double> y);

struct NbinLoglikGrad {
    double value = 0.0;
    Eigen::Vector4d grad = Eigen::Vector4d::Zero();  ///< d/d(omega, a, b, r)
};

/**
 * Normalized NBIN log-likelihood and its exact gradient. The (omega, a, b)
 * part propagates du_k = (1, u_{k-1}, y_{k-1}) + a du_{k-1} with du_1 = 0;
 * the r part is (1/n) sum_k [digamma(r + y_k) - ln(1 + u_k)] - digamma(r).
 */
NbinLoglikGrad nbin_loglik_grad(const NbinParams& params, double x1, std::span<const double> y);

/// Gradient over (omega, a, b, r). Throws std::invalid_argument for an empty series.
Eigen::Vector4d grad_loglik_nbin(const NbinParams& params, double x1, std::span<const double> y);

/**
 * Central-difference gradient of loglik with respect to the unconstrained
 * coordinates of FeasibleMap. Throws std::domain_error when a +-step stencil
 * point leaves the stable region.
 */
Eigen::VectorXd grad_loglik_numeric(const ModelParams& params, const State& x1,
                                    std::span<const double> y, double step = 1e-5);

}  // namespace odgarch
