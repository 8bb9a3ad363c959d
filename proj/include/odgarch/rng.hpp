#pragma once

#include <cstdint>
#include <random>

namespace odgarch {

/// splitmix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for replicate `j` at sample size `n` of an experiment rooted at `base`.
constexpr std::uint64_t split_seed(std::uint64_t base, std::uint64_t n, std::uint64_t j) noexcept {
    return splitmix64(splitmix64(splitmix64(base) ^ n) ^ j);
}

/**
 * @brief Portable random stream.
 *
 * Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
 * implements every variate transform locally, so a seed yields the same draws
 * with any conforming standard library.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal();
    /// Gamma(shape, scale = 1), Marsaglia–Tsang squeeze.
    double gamma(double shape);
    /// Poisson(mean). Inversion below 10, PTRS transformed rejection above.
    double poisson(double mean);

private:
    std::mt19937_64 engine_;
};

}  // namespace odgarch
