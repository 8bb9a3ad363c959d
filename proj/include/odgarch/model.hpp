#pragma once

#include "odgarch/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace odgarch {

enum class ModelKind { nbin, nm, ting };

std::string_view to_string(ModelKind kind);
/// Accepts "nbin", "nm", "ting". Throws std::invalid_argument otherwise.
ModelKind parse_model_kind(std::string_view name);

/**
 * @brief NBIN-GARCH(1,1) parameters.
 *
 * X_{k+1} = omega + a X_k + b Y_k and Y_{k+1} | X_{k+1} ~ NB(r, X/(1+X)),
 * so E[Y | X = x] = r x.
 */
struct NbinParams {
    double omega = 0.0;
    double a = 0.0;
    double b = 0.0;
    double r = 0.0;  ///< negative binomial shape

    /// Throws std::invalid_argument unless every field is finite and > 0.
    void validate() const;
    /// 1 - (a + b r)
    [[nodiscard]] double stability_margin() const noexcept { return 1.0 - (a + b * r); }
    [[nodiscard]] bool stable() const noexcept { return stability_margin() > 0.0; }
    [[nodiscard]] double psi(double x, double y) const noexcept { return omega + a * x + b * y; }
};

/**
 * @brief NM(d)-GARCH(1,1) parameters.
 *
 * X_{k+1} = omega + A X_k + Y_k^2 b, and Y given X is the zero-mean Gaussian
 * mixture with weights gamma and component variances X.
 */
struct NmParams {
    Eigen::VectorXd gamma;  ///< mixture weights on the simplex
    Eigen::VectorXd omega;  ///< entries > 0
    Eigen::MatrixXd A;      ///< entries >= 0
    Eigen::VectorXd b;      ///< entries >= 0

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(omega.size()); }
    void validate() const;
    /// A + b gamma^T; its spectral radius governs stationarity.
    [[nodiscard]] Eigen::MatrixXd companion() const { return A + b * gamma.transpose(); }
    [[nodiscard]] double stability_margin() const;
    [[nodiscard]] bool stable() const { return stability_margin() > 0.0; }
};

/**
 * @brief Threshold INGARCH(1,1) parameters.
 *
 * X_{k+1} = omega + a X_k + b Y_k and Y_{k+1} | X_{k+1} ~ Poisson(min(X, tau)).
 */
struct TingParams {
    double omega = 0.0;
    double a = 0.0;
    double b = 0.0;
    double tau = 0.0;

    void validate() const;
    [[nodiscard]] double stability_margin() const noexcept { return 1.0 - a; }
    [[nodiscard]] bool stable() const noexcept { return stability_margin() > 0.0; }
    [[nodiscard]] double psi(double x, double y) const noexcept { return omega + a * x + b * y; }
};

using ModelParams = std::variant<NbinParams, NmParams, TingParams>;

/// Hidden state. Length 1 for NBIN/TING, length d for NM.
using State = Eigen::VectorXd;

ModelKind kind_of(const ModelParams& params) noexcept;
/// Dimension of the state space (1, or d for NM).
int state_dim(const ModelParams& params) noexcept;
void validate(const ModelParams& params);
/// Observations of count models must be non-negative integers.
bool is_count_model(ModelKind kind) noexcept;

State scalar_state(double x);

/// Power iteration for the Perron root of an entrywise non-negative matrix.
struct SpectralRadius {
    double value = 0.0;
    int iterations = 0;
    /// false when the iteration cap was hit and `value` is the matrix-norm bound.
    bool converged = false;
};

/**
 * Spectral radius of a non-negative square matrix. Iterates on M + I (which
 * has the same Perron vector and is aperiodic) with l1 normalization until the
 * root estimate changes by less than `tol`, up to `max_iter` steps; falls back
 * to min(||M||_1, ||M||_inf) otherwise.
 */
SpectralRadius spectral_radius(const Eigen::MatrixXd& m, double tol = 1e-10, int max_iter = 10000);

struct Stability {
    bool stable = false;
    double margin = 0.0;
};

/// margin = 1 - (a + b r) | 1 - rho(A + b gamma^T) | 1 - a; stable iff margin > 0.
Stability stability_check(const ModelParams& params);

/// Fixed point of the noise-free recursion: omega / (1 - a), or (I - A)^{-1} omega.
State noise_free_fixed_point(const ModelParams& params);

/// psi_y(x). Throws std::invalid_argument on a state-dimension mismatch.
State psi_step(const ModelParams& params, const State& x, double y);

/// ln g(x; y). Throws std::invalid_argument on non-finite or out-of-support input.
double log_emission(const ModelParams& params, const State& x, double y);

/// One draw from G(x; .).
double sample_emission(const ModelParams& params, const State& x, Rng& rng);

/// E[Y | x] for count models, E[Y^2 | x] for NM.
double conditional_moment(const ModelParams& params, const State& x);

struct Series {
    ModelKind model = ModelKind::nbin;
    std::vector<double> y;
    /// Row k holds X_{k+1}; absent for observed (non-simulated) data.
    std::optional<Eigen::MatrixXd> x_trace;
    std::uint64_t seed = 0;
    // Simulation metadata, mirrored in the JSON sidecar.
    std::optional<ModelParams> params;
    int burn_in = 0;
    bool stable = true;

    [[nodiscard]] std::size_t n() const noexcept { return y.size(); }
    /// Throws std::invalid_argument when the invariants of the type fail.
    void validate() const;
};

struct SimulateOptions {
    std::optional<State> x0;  ///< defaults to the noise-free fixed point
    int burn_in = 500;
};

/**
 * Simulates n observations: Y_k ~ G(X_k; .), X_{k+1} = psi_{Y_k}(X_k), starting
 * from x0 and discarding the first `burn_in` pairs. Unstable parameters are
 * simulated and flagged in Series::stable. Throws std::overflow_error if the
 * state leaves the range of double.
 */
Series simulate(const ModelParams& params, std::size_t n, std::uint64_t seed,
                const SimulateOptions& options = {});

}  // namespace odgarch
