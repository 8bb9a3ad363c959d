#pragma once

namespace odgarch {

/// ln Γ(x) for x > 0 (Lanczos, g = 7, nine terms). Throws std::domain_error for x <= 0.
double log_gamma(double x);

/**
 * @brief Digamma function ψ(x) = d/dx ln Γ(x) for x > 0.
 *
 * Shifts the argument to x >= 8 with ψ(x) = ψ(x + 1) - 1/x and evaluates the
 * asymptotic expansion there. Relative error is below 1e-13 away from the
 * positive root near 1.4616.
 *
 * Throws std::domain_error for x <= 0 or non-finite x.
 */
double digamma(double x);

}  // namespace odgarch
