#pragma once

#include "odgarch/estimation.hpp"
#include "odgarch/model.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace odgarch {

/**
 * @brief One simulation study: a true parameter, a ladder of sample sizes and
 * m replicates per size.
 *
 * JSON form:
 * @code
 * {"model": "nbin", "theta_star": {...}, "sample_sizes": [128, 256, 512, 1024],
 *  "m": 200, "base_seed": 1, "x1": null,
 *  "optimizer": {"margin": 1e-4, "tol": 1e-6, "max_outer": 20, "max_inner": 500, "fd_step": 1e-5},
 *  "drop_nonconverged": false}
 * @endcode
 * A null `x1` lets each fit anchor at the fixed point of its initializer.
 */
struct ExperimentConfig {
    ModelKind model = ModelKind::nbin;
    ModelParams theta_star = NbinParams{3.0, 0.2, 0.2, 2.0};
    std::vector<std::size_t> sample_sizes{128, 256, 512, 1024};
    std::size_t m = 200;
    std::uint64_t base_seed = 1;
    std::optional<State> x1;
    FitOptions optimizer;
    bool drop_nonconverged = false;

    /// Throws std::invalid_argument on a broken invariant.
    void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

struct ReplicateResult {
    std::size_t n = 0;
    std::size_t j = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    /// Set when the fit threw; theta_hat and loglik_gap are NaN then.
    bool failed = false;
    double loglik_gap = 0.0;
    Eigen::VectorXd theta_hat;
};

struct SampleSizeSummary {
    std::size_t n = 0;
    Eigen::VectorXd mc_mean;
    Eigen::VectorXd made;
    std::size_t n_converged = 0;
    std::size_t n_used = 0;
};

struct McSummary {
    ExperimentConfig config;
    std::vector<std::string> param_names;
    std::vector<SampleSizeSummary> by_n;
    /// Indexed by (size index) * m + j.
    std::vector<ReplicateResult> replicates;
};

/// Called after each finished replicate with (done, total). Must be thread-safe.
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

/**
 * Simulate, fit and score every (n, j) pair with seed split_seed(base_seed, n, j).
 * Results land in an index-addressed array, so the summary does not depend on
 * `threads` (0 means hardware concurrency).
 */
McSummary run_experiment(const ExperimentConfig& config, unsigned threads = 0, const ProgressFn& progress = {});

/// Componentwise m^{-1} sum |theta_j - theta_star| in natural coordinates.
Eigen::VectorXd made(const std::vector<ModelParams>& estimates, const ModelParams& theta_star);

/// l(theta_hat) - l(theta_star) on the same series and anchor.
double loglik_gap(const Series& series, const ModelParams& theta_hat, const ModelParams& theta_star, const State& x1);

/// `model,n,param,mc_mean,made,n_converged`
std::string summary_to_csv(const McSummary& summary);
/// `model,n,j,seed,converged,loglik_gap,<param columns>`
std::string replicates_to_csv(const McSummary& summary);
/// Parameters as rows, sample sizes as columns, "mean (MADE)" cells.
std::string format_table(const McSummary& summary);

}  // namespace odgarch
