#include "odgarch/estimation.hpp"
#include "odgarch/feasible_map.hpp"
#include "odgarch/likelihood.hpp"
#include "odgarch/montecarlo.hpp"
#include "odgarch/rng.hpp"
#include "odgarch/verifier.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

using namespace odgarch;

namespace {

const NbinParams kM1{3.0, 0.2, 0.2, 2.0};

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

TEST(FeasibleMap, RoundTripAllModels) {
    Rng rng(41);
    for (ModelKind kind : {ModelKind::nbin, ModelKind::ting, ModelKind::nm}) {
        for (int t = 0; t < 20; ++t) {
            const ModelParams p = random_stable_params(kind, rng, 3);
            const FeasibleMap map(p);
            const Eigen::VectorXd z = map.encode(p);
            EXPECT_EQ(z.size(), map.size());
            const Eigen::VectorXd back = natural_vector(map.decode(z));
            EXPECT_LT((back - natural_vector(p)).lpNorm<Eigen::Infinity>(), 1e-12);
        }
    }
}

TEST(FeasibleMap, DecodeIsAlwaysValid) {
    Rng rng(42);
    const FeasibleMap map(ModelKind::nm, 2);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd z(map.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = 20.0 * (rng.uniform() - 0.5);
        EXPECT_NO_THROW(validate(map.decode(z)));
    }
}

TEST(FeasibleMap, JacobianMatchesFiniteDifferences) {
    const ModelParams p = nm2();
    const FeasibleMap map(p);
    const Eigen::VectorXd z = map.encode(p);
    const Eigen::MatrixXd jac = map.jacobian(z);
    ASSERT_EQ(jac.rows(), map.natural_size());
    ASSERT_EQ(jac.cols(), map.size());
    for (int j = 0; j < map.size(); ++j) {
        Eigen::VectorXd up = z;
        Eigen::VectorXd dn = z;
        up[j] += 1e-6;
        dn[j] -= 1e-6;
        const Eigen::VectorXd col = (natural_vector(map.decode(up)) - natural_vector(map.decode(dn))) / 2e-6;
        EXPECT_LT((col - jac.col(j)).lpNorm<Eigen::Infinity>(), 1e-7);
    }
}

TEST(FeasibleMap, Names) {
    EXPECT_EQ(natural_names(ModelParams(kM1)), (std::vector<std::string>{"omega", "a", "b", "r"}));
    EXPECT_EQ(natural_names(ModelParams(TingParams{1, .1, .1, 1})),
              (std::vector<std::string>{"omega", "a", "b", "tau"}));
    const auto nm = natural_names(ModelParams(nm2()));
    EXPECT_EQ(nm.size(), 10u);
    EXPECT_EQ(nm.front(), "gamma_1");
}

/// The CLS initializer is consistent: on long (M.1) series it lands near
/// phi = a + b r = .6, a = .2 and r = 2.
TEST(Cls, CalibratedOnLongSeries) {
    double phi = 0.0;
    double ma = 0.0;
    double r = 0.0;
    const int reps = 20;
    for (int s = 0; s < reps; ++s) {
        const Series series = simulate(kM1, 16384, 500 + s);
        const ClsEstimate e = cls_estimate(series.y);
        phi += e.phi / reps;
        ma += e.ma / reps;
        r += e.r / reps;
        EXPECT_FALSE(e.phi_clamped);
        EXPECT_LT(e.params.a + e.params.b * e.params.r, 1.0);
    }
    EXPECT_NEAR(phi, 0.6, 0.03);
    EXPECT_NEAR(ma, 0.2, 0.05);
    EXPECT_NEAR(r, 2.0, 0.25);
}

TEST(Cls, ClampsExplosiveSeries) {
    std::vector<double> y;
    for (int k = 0; k < 200; ++k) y.push_back(std::floor(std::pow(1.03, k)) + (k % 3));
    const ClsEstimate e = cls_estimate(y, 1e-4);
    EXPECT_TRUE(e.phi_clamped);
    EXPECT_LE(e.params.a + e.params.b * e.params.r, 1.0 - 1e-4 + 1e-12);
}

TEST(Cls, RejectsDegenerateInput) {
    EXPECT_THROW(cls_estimate(std::vector<double>(100, 4.0)), std::invalid_argument);
    EXPECT_THROW(cls_estimate(std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(MleFit, ConvergesOnM1) {
    int converged = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Series s = simulate(kM1, 1024, seed);
        const FitResult r = mle_fit(s, ModelKind::nbin);
        converged += r.converged ? 1 : 0;
        EXPECT_GE(r.loglik_hat, r.loglik_init - 1e-12);
        EXPECT_GE(r.constraint_margin, 1e-4 - 1e-10);
        if (r.converged) {
            EXPECT_LT(r.kkt_norm, 1e-6);
            EXPECT_GE(loglik_gap(s, r.theta_hat, kM1, r.x1_used), -1e-8);
        }
    }
    EXPECT_GE(converged, 48);
}

TEST(MleFit, LoglikNonDecreasingAcrossOuterRounds) {
    const Series s = simulate(kM1, 512, 3);
    const FitResult r = mle_fit(s, ModelKind::nbin);
    ASSERT_FALSE(r.outer_loglik.empty());
    EXPECT_GE(r.outer_loglik.front(), r.loglik_init - 1e-12);
    for (std::size_t i = 1; i < r.outer_loglik.size(); ++i) {
        EXPECT_GE(r.outer_loglik[i], r.outer_loglik[i - 1] - 1e-10);
    }
}

TEST(MleFit, HonoursX1) {
    const Series s = simulate(kM1, 256, 4);
    const FitResult r = mle_fit(s, ModelKind::nbin, scalar_state(7.5));
    EXPECT_EQ(r.x1_used[0], 7.5);
    EXPECT_EQ(to_json(r)["x1"].get<double>(), 7.5);
    EXPECT_NEAR(r.loglik_hat, loglik(r.theta_hat, scalar_state(7.5), s.y).value, 1e-12);
}

TEST(MleFit, MarginIsRespectedNearBoundary) {
    const NbinParams near{0.5, 0.5, 0.24, 2.0};  // a + b r = 0.98
    const Series s = simulate(near, 512, 5);
    FitOptions opts;
    opts.margin = 0.05;
    const FitResult r = mle_fit(s, ModelKind::nbin, std::nullopt, opts);
    const auto& p = std::get<NbinParams>(r.theta_hat);
    EXPECT_LE(p.a + p.b * p.r, 0.95 + 1e-8);
}

/// With omega = 1, a = b = .3 the state crosses tau = 4 regularly, so all four
/// parameters enter the likelihood. tau only acts through the crossings and
/// is left loose.
TEST(MleFit, TingRecoversParameters) {
    const TingParams truth{1.0, 0.3, 0.3, 4.0};
    for (std::uint64_t seed : {6u, 7u, 8u}) {
        const Series s = simulate(truth, 8192, seed);
        const FitResult r = mle_fit(s, ModelKind::ting);
        const auto& p = std::get<TingParams>(r.theta_hat);
        EXPECT_GE(r.loglik_hat, loglik(truth, r.x1_used, s.y).value - 1e-6);
        EXPECT_NEAR(p.a, 0.3, 0.1);
        EXPECT_NEAR(p.b, 0.3, 0.1);
        EXPECT_NEAR(p.tau, 4.0, 2.0);
    }
}

/// At omega/(1-a) > tau the emission is Poisson(tau) for every k: only tau is
/// identified and the fit must still terminate quickly with a feasible point.
TEST(MleFit, TingFlatDirectionsTerminate) {
    const TingParams truth{3.0, 0.35, 0.1, 4.0};
    const Series s = simulate(truth, 4096, 6);
    const FitResult r = mle_fit(s, ModelKind::ting);
    EXPECT_LE(r.n_outer, 3);
    EXPECT_NEAR(std::get<TingParams>(r.theta_hat).tau, 4.0, 0.2);
    EXPECT_GE(r.loglik_hat, r.loglik_init);
}

TEST(MleFit, NmImprovesOnTruthLikelihood) {
    const NmParams truth = nm2();
    const Series s = simulate(truth, 2048, 7);
    const FitResult r = mle_fit_from(s, truth, std::nullopt);
    EXPECT_GE(r.loglik_hat, loglik(truth, r.x1_used, s.y).value - 1e-9);
    EXPECT_TRUE(stability_check(r.theta_hat).stable);
    const auto& p = std::get<NmParams>(r.theta_hat);
    EXPECT_NEAR(p.gamma.sum(), 1.0, 1e-12);
}

TEST(MleFit, NmFromScratchStaysFeasible) {
    const Series s = simulate(nm2(), 1024, 8);
    const FitResult r = mle_fit(s, ModelKind::nm);
    EXPECT_GE(r.loglik_hat, r.loglik_init - 1e-12);
    EXPECT_GE(stability_check(r.theta_hat).margin, 1e-4 - 1e-9);
}

TEST(MleFit, RejectsDegenerateSeries) {
    Series s;
    s.y.assign(100, 0.0);
    EXPECT_THROW(mle_fit(s, ModelKind::nbin), std::invalid_argument);
}

TEST(MleFit, JsonHasDocumentedKeys) {
    const Series s = simulate(kM1, 128, 9);
    const auto j = to_json(mle_fit(s, ModelKind::nbin));
    for (const char* key : {"model", "theta_init", "theta_hat", "loglik_init", "loglik_hat", "converged", "n_outer",
                            "n_inner", "constraint_margin", "x1", "seed"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j["seed"].get<std::uint64_t>(), 9u);
}
