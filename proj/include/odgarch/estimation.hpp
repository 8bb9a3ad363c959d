#pragma once

#include "odgarch/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace odgarch {

struct FitOptions {
    double margin = 1e-4;     ///< required distance to the stability boundary
    double tol = 1e-6;        ///< KKT tolerance of the converged flag
    int max_outer = 20;
    int max_inner = 500;
    double fd_step = 1e-5;    ///< finite-difference step (NM, TING)
    int nm_dim = 2;           ///< mixture size when fitting NM from scratch
};

/// Intermediate quantities of the conditional-least-squares initializer.
struct ClsEstimate {
    double mean = 0.0;
    double variance = 0.0;
    double ols_slope = 0.0;   ///< OLS slope of Y_k on (1, Y_{k-1})
    double phi = 0.0;         ///< AR root of the ARMA(1,1) mean representation, a + b r
    double ma = 0.0;          ///< MA root, estimate of a
    double r = 0.0;
    bool phi_clamped = false; ///< phi was pulled back to 1 - margin
    NbinParams params;
};

/**
 * CLS initializer from the ARMA(1,1) representation of the conditional mean
 * mu_k = r omega + a mu_{k-1} + r b Y_{k-1}.
 *
 * phi comes from the autocorrelation ratio rho(2)/rho(1) (OLS slope when the
 * lag-1 correlation is insignificant), the MA root from rho(1), r from the
 * over-dispersion of the innovations. The result is clamped so that
 * a + b r <= 1 - margin.
 *
 * Throws std::invalid_argument for n < 10 or a constant series.
 */
ClsEstimate cls_estimate(std::span<const double> y, double margin = 1e-4);
NbinParams cls_init_nbin(std::span<const double> y, double margin = 1e-4);

/// Starting point for any model; NBIN delegates to cls_init_nbin.
ModelParams init_generic(std::span<const double> y, ModelKind kind, int nm_dim = 2, double margin = 1e-4);

struct FitResult {
    ModelKind model = ModelKind::nbin;
    ModelParams theta_init;
    ModelParams theta_hat;
    double loglik_init = 0.0;
    double loglik_hat = 0.0;
    int n_outer = 0;
    int n_inner = 0;
    bool converged = false;
    double constraint_margin = 0.0;
    double kkt_norm = 0.0;
    State x1_used;
    std::uint64_t seed = 0;
    /// Log-likelihood after each outer round.
    std::vector<double> outer_loglik;
};

/**
 * Conditional MLE over the stable region. Positivity is built into the
 * FeasibleMap coordinates; stability c(theta) <= 0 with
 * c = (a + b r) - (1 - margin), rho(A + b gamma^T) - (1 - margin) or
 * a - (1 - margin) is enforced by an augmented Lagrangian. Gradients are
 * analytic for NBIN and central differences otherwise.
 *
 * x1 defaults to the noise-free fixed point of the initializer. Never throws
 * on non-convergence; degenerate series raise std::invalid_argument.
 */
FitResult mle_fit(const Series& series, ModelKind kind, const std::optional<State>& x1 = std::nullopt,
                  const FitOptions& options = {});

/// Same fit started from a caller-supplied feasible point.
FitResult mle_fit_from(const Series& series, const ModelParams& start, const std::optional<State>& x1,
                       const FitOptions& options = {});

nlohmann::json to_json(const FitResult& fit);

}  // namespace odgarch
