#include "odgarch/special_functions.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace odgarch {

namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczosCoef = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7,
};

}  // namespace

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::domain_error("log_gamma: argument must be positive and finite");
    }
    if (x < 0.5) {
        // Keep the series argument away from zero.
        return log_gamma(x + 1.0) - std::log(x);
    }
    const double z = x - 1.0;
    double series = kLanczosCoef[0];
    for (std::size_t i = 1; i < kLanczosCoef.size(); ++i) {
        series += kLanczosCoef[i] / (z + static_cast<double>(i));
    }
    const double t = z + kLanczosG + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(series);
}

double digamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::domain_error("digamma: argument must be positive and finite");
    }
    double shift = 0.0;
    while (x < 8.0) {
        shift += 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli tail: B_2k / (2k x^2k) for k = 1..7.
    const double tail =
        inv2 * (1.0 / 12.0 -
        inv2 * (1.0 / 120.0 -
        inv2 * (1.0 / 252.0 -
        inv2 * (1.0 / 240.0 -
        inv2 * (1.0 / 132.0 -
        inv2 * (691.0 / 32760.0 -
        inv2 * (1.0 / 12.0)))))));
    return std::log(x) - 0.5 * inv - tail - shift;
}

}  // namespace odgarch
