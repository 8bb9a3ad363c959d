#pragma once

#include "odgarch/model.hpp"
#include "odgarch/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace odgarch {

/**
 * @brief Sampling plan for the assumption checks.
 *
 * States are drawn from a scrambled Halton sequence mapped to the log-scaled
 * box [omega, x_hi] (componentwise for NM). Count observations cover
 * {0, ..., y_max}; continuous observations use `n_y_nodes` Gauss–Hermite nodes
 * scaled by sqrt(2 x_hi).
 */
struct GridSpec {
    std::size_t n_triples = 10000;
    double x_hi = 1e3;
    int y_max = 200;
    int n_y_nodes = 64;
    std::uint64_t seed = 0x5EED;
    std::size_t n_drift_mc_points = 20;
    std::size_t n_drift_mc_draws = 20000;
};

struct CheckRecord {
    std::string name;
    std::size_t n_samples = 0;
    std::size_t n_violations = 0;
    /// Smallest (bound - observed) over the samples; negative means a violation.
    double worst_slack = 0.0;
    bool passed = true;
    bool skipped = false;
    std::string reason;
    nlohmann::json constants = nlohmann::json::object();
};

struct VerifierReport {
    ModelKind model = ModelKind::nbin;
    ModelParams params;
    std::vector<CheckRecord> checks;

    [[nodiscard]] bool passed() const;
    [[nodiscard]] std::size_t total_violations() const;
};

/// |psi_y(x) - psi_y(x')| / d(x, x') against the model's contraction rate.
CheckRecord check_contraction(const ModelParams& params, const GridSpec& grid = {});
/// RV <= lambda V + beta in closed form, plus a Monte Carlo check of RV.
CheckRecord check_drift(const ModelParams& params, const GridSpec& grid = {});
/// min{g(x;y), g(x';y)} >= alpha(x,x') g(phi(x,x'); y) and alpha in (0, 1].
CheckRecord check_minorization(const ModelParams& params, const GridSpec& grid = {});
/// |ln g(x;y) - ln g(x';y)| <= K(y) |x - x'| on [omega, inf).
CheckRecord check_lipschitz_logg(const ModelParams& params, const GridSpec& grid = {});
/// h(t; y) non-decreasing in t for the factorization g = j(t) h(t; y).
CheckRecord check_h_monotone(const ModelParams& params, const GridSpec& grid = {});

VerifierReport verify_all(const ModelParams& params, const GridSpec& grid = {});

nlohmann::json to_json(const CheckRecord& check);
nlohmann::json to_json(const VerifierReport& report);

/// Closed-form minorization constant and anchor.
double minorization_alpha(const ModelParams& params, const State& x, const State& xp);
State minorization_phi(const State& x, const State& xp);

/// Scrambled Halton point (dimension <= 16), deterministic in (seed, index).
class HaltonSequence {
public:
    HaltonSequence(int dims, std::uint64_t seed);
    [[nodiscard]] std::vector<double> point(std::uint64_t index) const;

private:
    int dims_;
    std::vector<std::vector<int>> perms_;
};

/// Gauss–Hermite nodes (Golub–Welsch), ascending.
std::vector<double> gauss_hermite_nodes(int n);

/// Stable parameter draw for property tests and the random part of the suite.
ModelParams random_stable_params(ModelKind kind, Rng& rng, int nm_dim = 2);

}  // namespace odgarch
