#pragma once

#include "odgarch/model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace odgarch {

/**
 * @brief Bijection between a model's positivity/simplex constraints and R^k.
 *
 * Positive scalars are mapped through log. NM mixture weights use a softmax
 * with the first logit pinned to zero. Non-negative NM entries (A, b) are
 * encoded as log(max(v, kEntryFloor)), so an exact zero decodes to the floor.
 * The stability constraint is not part of the map; the optimizer handles it.
 *
 * "Natural" coordinates are the flattened parameters: (omega, a, b, r) for
 * NBIN, (omega, a, b, tau) for TING and (gamma, omega, A row-major, b) for NM.
 */
class FeasibleMap {
public:
    static constexpr double kEntryFloor = 1e-6;

    FeasibleMap(ModelKind kind, int dim = 1);
    explicit FeasibleMap(const ModelParams& like);

    [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    /// Number of unconstrained coordinates.
    [[nodiscard]] int size() const noexcept;
    /// Number of natural coordinates.
    [[nodiscard]] int natural_size() const noexcept;

    [[nodiscard]] Eigen::VectorXd encode(const ModelParams& params) const;
    [[nodiscard]] ModelParams decode(const Eigen::VectorXd& z) const;

    /// d natural / d z, natural_size() x size().
    [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd& z) const;

    [[nodiscard]] std::vector<std::string> natural_names() const;

private:
    ModelKind kind_;
    int dim_;
};

/// Flattened natural coordinates (see FeasibleMap).
Eigen::VectorXd natural_vector(const ModelParams& params);
std::vector<std::string> natural_names(const ModelParams& params);

}  // namespace odgarch
