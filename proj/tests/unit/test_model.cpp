#include "odgarch/model.hpp"
#include "odgarch/rng.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

using namespace odgarch;

namespace {

const NbinParams kM1{3.0, 0.2, 0.2, 2.0};
const TingParams kTing{3.0, 0.35, 0.1, 4.0};

NmParams nm2() {
    NmParams p;
    p.gamma = Eigen::Vector2d(0.3, 0.7);
    p.omega = Eigen::Vector2d(0.5, 1.0);
    p.A.resize(2, 2);
    p.A << 0.5, 0.1, 0.0, 0.4;
    p.b = Eigen::Vector2d(0.1, 0.2);
    return p;
}

}  // namespace

TEST(Emission, NbinExactRationalValues) {
    // r=2, x=3, y=2: C(3,2) (1/4)^2 (3/4)^2 = 27/256.
    EXPECT_NEAR(log_emission(NbinParams{1, 0.1, 0.1, 2.0}, scalar_state(3.0), 2.0), std::log(27.0 / 256.0), 1e-13);
    // r=3, x=1, y=4: C(6,4) (1/2)^7 = 15/128.
    EXPECT_NEAR(log_emission(NbinParams{1, 0.1, 0.1, 3.0}, scalar_state(1.0), 4.0), std::log(15.0 / 128.0), 1e-13);
    // y=0: (1/(1+x))^r.
    EXPECT_NEAR(log_emission(kM1, scalar_state(0.5), 0.0), 2.0 * std::log(1.0 / 1.5), 1e-14);
}

TEST(Emission, TingPoissonAtCappedRate) {
    EXPECT_NEAR(log_emission(kTing, scalar_state(5.0), 3.0), std::log(std::exp(-4.0) * 64.0 / 6.0), 1e-13);
    EXPECT_NEAR(log_emission(kTing, scalar_state(2.0), 3.0), std::log(std::exp(-2.0) * 8.0 / 6.0), 1e-13);
}

TEST(Emission, NmMixtureDensity) {
    const NmParams p = nm2();
    const State x = Eigen::Vector2d(1.0, 4.0);
    auto phi = [](double y, double v) { return std::exp(-y * y / (2 * v)) / std::sqrt(2 * std::numbers::pi * v); };
    EXPECT_NEAR(log_emission(p, x, 1.0), std::log(0.3 * phi(1.0, 1.0) + 0.7 * phi(1.0, 4.0)), 1e-13);
    EXPECT_NEAR(log_emission(p, x, -1.0), log_emission(p, x, 1.0), 1e-15);
    // Far tail stays finite through log-sum-exp.
    EXPECT_TRUE(std::isfinite(log_emission(p, x, 200.0)));
}

TEST(Emission, CountPmfsSumToOne) {
    for (double x : {0.05, 1.0, 7.5, 40.0}) {
        double s_nb = 0.0;
        double s_t = 0.0;
        for (int y = 0; y < 5000; ++y) {
            s_nb += std::exp(log_emission(kM1, scalar_state(x), y));
            s_t += std::exp(log_emission(kTing, scalar_state(x), y));
        }
        EXPECT_NEAR(s_nb, 1.0, 1e-10) << "x=" << x;
        EXPECT_NEAR(s_t, 1.0, 1e-10) << "x=" << x;
    }
}

TEST(Emission, NmDensityIntegratesToOne) {
    const NmParams p = nm2();
    const State x = Eigen::Vector2d(0.7, 3.0);
    // Composite Simpson on [-40, 40].
    const int m = 20000;
    const double h = 80.0 / m;
    double s = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * std::exp(log_emission(p, x, -40.0 + i * h));
    }
    EXPECT_NEAR(s * h / 3.0, 1.0, 1e-9);
}

TEST(Emission, RejectsOutOfSupport) {
    EXPECT_THROW(log_emission(kM1, scalar_state(1.0), -1.0), std::invalid_argument);
    EXPECT_THROW(log_emission(kM1, scalar_state(1.0), 1.5), std::invalid_argument);
    EXPECT_THROW(log_emission(kM1, scalar_state(-1.0), 1.0), std::invalid_argument);
}

TEST(Psi, AffineRecursions) {
    EXPECT_DOUBLE_EQ(psi_step(kM1, scalar_state(5.0), 4.0)[0], 3.0 + 0.2 * 5.0 + 0.2 * 4.0);
    EXPECT_DOUBLE_EQ(psi_step(kTing, scalar_state(5.0), 4.0)[0], 3.0 + 0.35 * 5.0 + 0.1 * 4.0);
    const NmParams p = nm2();
    const State x = Eigen::Vector2d(1.0, 2.0);
    const State out = psi_step(p, x, 3.0);
    EXPECT_DOUBLE_EQ(out[0], 0.5 + 0.5 * 1.0 + 0.1 * 2.0 + 9.0 * 0.1);
    EXPECT_DOUBLE_EQ(out[1], 1.0 + 0.4 * 2.0 + 9.0 * 0.2);
    EXPECT_THROW(psi_step(p, scalar_state(1.0), 1.0), std::invalid_argument);
}

TEST(Stability, Margins) {
    EXPECT_NEAR(stability_check(kM1).margin, 0.4, 1e-15);
    EXPECT_TRUE(stability_check(kM1).stable);
    EXPECT_FALSE(stability_check(NbinParams{3, 0.9, 0.9, 2}).stable);
    EXPECT_NEAR(stability_check(kTing).margin, 0.65, 1e-15);
    EXPECT_FALSE(stability_check(TingParams{1, 1.0, 0.5, 2}).stable);
}

TEST(Stability, SpectralRadiusMatchesEigenSolver) {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        const int d = 2 + t % 4;
        Eigen::MatrixXd m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = rng.uniform() * (rng.uniform() < 0.3 ? 0.0 : 1.0);
        const Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
        const double ref = es.eigenvalues().cwiseAbs().maxCoeff();
        EXPECT_NEAR(spectral_radius(m, 1e-14).value, ref, 1e-8 * (1.0 + ref));
    }
}

TEST(Stability, NmCompanion) {
    const NmParams p = nm2();
    const Eigen::EigenSolver<Eigen::MatrixXd> es(p.companion(), false);
    EXPECT_NEAR(stability_check(p).margin, 1.0 - es.eigenvalues().cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FixedPoint, NoiseFreeRecursion) {
    EXPECT_NEAR(noise_free_fixed_point(kM1)[0], 3.0 / 0.8, 1e-14);
    const NmParams p = nm2();
    const State x = noise_free_fixed_point(p);
    EXPECT_LT((psi_step(p, x, 0.0) - x).norm(), 1e-12);
}

TEST(Validate, RejectsBadParameters) {
    EXPECT_THROW(validate(NbinParams{0.0, 0.2, 0.2, 2.0}), std::invalid_argument);
    EXPECT_THROW(validate(NbinParams{3.0, -0.2, 0.2, 2.0}), std::invalid_argument);
    EXPECT_THROW(validate(TingParams{3.0, 0.2, 0.2, 0.0}), std::invalid_argument);
    NmParams p = nm2();
    p.gamma = Eigen::Vector2d(0.5, 0.6);
    EXPECT_THROW(validate(p), std::invalid_argument);
    p = nm2();
    p.A(0, 1) = -0.1;
    EXPECT_THROW(validate(p), std::invalid_argument);
}

TEST(Sampling, NbinConditionalMoments) {
    Rng rng(21);
    const double x = 2.5;
    const int n = 200000;
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = sample_emission(kM1, scalar_state(x), rng);
        s += y;
        s2 += y * y;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, kM1.r * x, 5.0 * std::sqrt(kM1.r * x * (1 + x) / n));
    EXPECT_NEAR(var / (kM1.r * x * (1 + x)), 1.0, 0.03);
    EXPECT_DOUBLE_EQ(conditional_moment(kM1, scalar_state(x)), kM1.r * x);
}

TEST(Sampling, NmSecondMoment) {
    Rng rng(22);
    const NmParams p = nm2();
    const State x = Eigen::Vector2d(1.0, 3.0);
    const int n = 200000;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = sample_emission(p, x, rng);
        s2 += y * y;
    }
    const double m2 = p.gamma.dot(x);
    EXPECT_DOUBLE_EQ(conditional_moment(p, x), m2);
    // Var(Y^2) <= 3 sum gamma x^2.
    EXPECT_NEAR(s2 / n, m2, 5.0 * std::sqrt(3.0 * p.gamma.dot(x.cwiseAbs2()) / n));
}

TEST(Simulate, DeterministicInSeed) {
    const Series a = simulate(kM1, 256, 99);
    const Series b = simulate(kM1, 256, 99);
    const Series c = simulate(kM1, 256, 100);
    EXPECT_EQ(a.y, b.y);
    EXPECT_NE(a.y, c.y);
    ASSERT_TRUE(a.x_trace.has_value());
    EXPECT_EQ(a.x_trace->rows(), 256);
    EXPECT_TRUE(a.stable);
}

TEST(Simulate, TraceFollowsPsi) {
    const Series s = simulate(kTing, 100, 5);
    for (int k = 0; k + 1 < 100; ++k) {
        EXPECT_DOUBLE_EQ((*s.x_trace)(k + 1, 0), kTing.psi((*s.x_trace)(k, 0), s.y[static_cast<std::size_t>(k)]));
    }
}

TEST(Simulate, UnstableIsFlaggedOrDiverges) {
    const NbinParams bad{3.0, 0.9, 0.9, 2.0};
    SimulateOptions opts;
    opts.burn_in = 0;
    const Series s = simulate(bad, 64, 1, opts);
    EXPECT_FALSE(s.stable);
    EXPECT_THROW(simulate(bad, 100000, 1), std::overflow_error);
}

/// Brute-force stationary mean of (M.1) from std::random samplers, independent
/// of the library's variate code. E[X] = omega / (1 - a - b r) = 7.5, E[Y] = r E[X] = 15.
TEST(Simulate, StationaryMeanOfM1) {
    std::mt19937_64 eng(2024);
    double oracle_sum = 0.0;
    long oracle_n = 0;
    for (int rep = 0; rep < 50; ++rep) {
        double x = 7.5;
        for (int k = 0; k < 1524; ++k) {
            std::gamma_distribution<double> g(kM1.r, x);
            std::poisson_distribution<long> pois(g(eng));
            const double y = static_cast<double>(pois(eng));
            if (k >= 500) {
                oracle_sum += y;
                ++oracle_n;
            }
            x = kM1.psi(x, y);
        }
    }
    const double oracle_mean = oracle_sum / static_cast<double>(oracle_n);

    double lib_sum = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Series s = simulate(kM1, 1024, seed);
        for (double y : s.y) lib_sum += y;
    }
    const double lib_mean = lib_sum / (50.0 * 1024.0);

    EXPECT_NEAR(oracle_mean, 15.0, 1.0);
    EXPECT_NEAR(lib_mean, 15.0, 1.0);
    EXPECT_NEAR(lib_mean, oracle_mean, 1.0);
}

TEST(ModelKind, ParseAndPrint) {
    EXPECT_EQ(parse_model_kind("nbin"), ModelKind::nbin);
    EXPECT_EQ(parse_model_kind("nm"), ModelKind::nm);
    EXPECT_EQ(parse_model_kind("ting"), ModelKind::ting);
    EXPECT_EQ(to_string(ModelKind::ting), "ting");
    EXPECT_THROW(parse_model_kind("garch"), std::invalid_argument);
}
