#include "odgarch/rng.hpp"

#include "odgarch/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace odgarch {

double Rng::normal() {
    // Box–Muller, one variate per pair of uniforms (no cached state).
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
    if (!(shape > 0.0) || !std::isfinite(shape)) {
        throw std::invalid_argument("Rng::gamma: shape must be positive");
    }
    if (shape < 1.0) {
        // Gamma(k) = Gamma(k + 1) * U^(1/k)
        const double g = gamma(shape + 1.0);
        return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double z;
        double v;
        do {
            z = normal();
            v = 1.0 + c * z;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        const double z2 = z * z;
        if (u < 1.0 - 0.0331 * z2 * z2) return d * v;
        if (std::log(u) < 0.5 * z2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double Rng::poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw std::invalid_argument("Rng::poisson: mean must be finite and non-negative");
    }
    if (mean == 0.0) return 0.0;
    if (mean < 10.0) {
        const double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        double k = 0.0;
        while (u > cdf && k < 1000.0) {
            k += 1.0;
            p *= mean / k;
            cdf += p;
        }
        return k;
    }
    if (mean > 1e15) {
        // Integer resolution of double is gone; the normal limit is exact to rounding.
        return std::max(0.0, std::floor(mean + std::sqrt(mean) * normal() + 0.5));
    }
    // Hörmann (1993), PTRS.
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) return k;
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - log_gamma(k + 1.0)) {
            return k;
        }
    }
}

}  // namespace odgarch
