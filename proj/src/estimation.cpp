#include "odgarch/estimation.hpp"

#include "odgarch/feasible_map.hpp"
#include "odgarch/io.hpp"
#include "odgarch/likelihood.hpp"
#include "odgarch/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace odgarch {

namespace {

constexpr double kCoefFloor = 1e-3;
// Keeps exp() of unconstrained coordinates away from underflow/overflow.
constexpr double kZLimit = 300.0;

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    double acf1 = 0.0;
    double acf2 = 0.0;
    double ols_slope = 0.0;
};

Moments sample_moments(std::span<const double> y) {
    const auto n = static_cast<double>(y.size());
    Moments m;
    for (double v : y) m.mean += v;
    m.mean /= n;
    for (double v : y) m.variance += (v - m.mean) * (v - m.mean);
    m.variance /= n;
    auto autocov = [&](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t k = lag; k < y.size(); ++k) acc += (y[k] - m.mean) * (y[k - lag] - m.mean);
        return acc / n;
    };
    m.acf1 = autocov(1) / m.variance;
    m.acf2 = autocov(2) / m.variance;

    // OLS of y_k on (1, y_{k-1}) over the n - 1 pairs.
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 1; k < y.size(); ++k) {
        mx += y[k - 1];
        my += y[k];
    }
    mx /= n - 1.0;
    my /= n - 1.0;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t k = 1; k < y.size(); ++k) {
        sxy += (y[k - 1] - mx) * (y[k] - my);
        sxx += (y[k - 1] - mx) * (y[k - 1] - mx);
    }
    m.ols_slope = sxx > 0.0 ? sxy / sxx : 0.0;
    return m;
}

void require_usable(std::span<const double> y) {
    if (y.size() < 10) throw std::invalid_argument("initializer needs at least 10 observations");
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*lo == *hi) throw std::invalid_argument("degenerate series: all observations are equal");
}

/// Lag-1 autocorrelation of an ARMA(1,1) with AR root phi and MA root theta
/// (y_k - phi y_{k-1} = e_k - theta e_{k-1}).
double arma11_acf1(double phi, double theta) {
    return (1.0 - phi * theta) * (phi - theta) / (1.0 + theta * theta - 2.0 * phi * theta);
}

/// Solves arma11_acf1(phi, theta) = rho1 for theta in [0, phi] by bisection.
double solve_ma_root(double phi, double rho1) {
    if (rho1 >= phi) return 0.0;
    if (rho1 <= 0.0) return phi;
    double lo = 0.0;
    double hi = phi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (arma11_acf1(phi, mid) > rho1) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// AR/MA split shared by the NBIN and TING initializers.
void fit_arma_split(std::span<const double> y, double margin, ClsEstimate& est) {
    const Moments m = sample_moments(y);
    est.mean = m.mean;
    est.variance = m.variance;
    est.ols_slope = m.ols_slope;

    const double cap = 1.0 - margin;
    const double significance = 2.0 / std::sqrt(static_cast<double>(y.size()));
    double phi;
    if (m.ols_slope >= 1.0) {
        phi = cap;
    } else if (m.acf1 > significance && m.acf2 > 0.0 && m.acf2 < m.acf1) {
        phi = std::max(m.acf2 / m.acf1, m.acf1);
    } else {
        phi = std::max(m.ols_slope, 0.0);
    }
    if (phi >= cap) {
        phi = cap;
        est.phi_clamped = true;
    }
    phi = std::max(phi, 2.0 * kCoefFloor);
    est.phi = phi;
    est.ma = std::clamp(solve_ma_root(phi, m.acf1), kCoefFloor, phi - kCoefFloor);
}

ModelParams clamp_feasible(ModelParams params, double margin) {
    const double cap = 1.0 - margin;
    if (auto* p = std::get_if<NbinParams>(&params)) {
        const double s = p->a + p->b * p->r;
        if (s > cap) {
            const double f = cap / s * (1.0 - 1e-14);
            p->a *= f;
            p->b *= f;
        }
    } else if (auto* t = std::get_if<TingParams>(&params)) {
        t->a = std::min(t->a, cap * (1.0 - 1e-14));
    } else {
        auto& nm = std::get<NmParams>(params);
        const double rho = spectral_radius(nm.companion(), 1e-14).value;
        if (rho > cap) {
            const double f = cap / rho * (1.0 - 1e-12);
            nm.A *= f;
            nm.b *= f;
        }
    }
    return params;
}

double constraint_value(const ModelParams& params, double margin) {
    return (1.0 - margin) - stability_check(params).margin;
}

}  // namespace

ClsEstimate cls_estimate(std::span<const double> y, double margin) {
    require_usable(y);
    ClsEstimate est;
    fit_arma_split(y, margin, est);
    const double phi = est.phi;
    const double a0 = est.ma;
    const double beta = phi - a0;  // r b

    // Innovation variance of the mean recursion and the implied r.
    const double denom = 1.0 - phi * phi + beta * beta;
    const double innov = est.variance * (1.0 - phi * phi) / denom;
    const double var_mean = est.variance - innov;
    double r0 = 10.0;
    if (innov > est.mean) {
        r0 = (var_mean + est.mean * est.mean) / (innov - est.mean);
    }
    r0 = std::clamp(r0, 0.05, 100.0);
    est.r = r0;

    NbinParams p;
    p.r = r0;
    p.a = a0;
    p.b = beta / r0;
    p.omega = std::max(est.mean * (1.0 - phi) / r0, kCoefFloor);
    est.params = std::get<NbinParams>(clamp_feasible(p, margin));
    return est;
}

NbinParams cls_init_nbin(std::span<const double> y, double margin) { return cls_estimate(y, margin).params; }

ModelParams init_generic(std::span<const double> y, ModelKind kind, int nm_dim, double margin) {
    if (kind == ModelKind::nbin) return cls_init_nbin(y, margin);
    require_usable(y);
    if (kind == ModelKind::ting) {
        ClsEstimate est;
        fit_arma_split(y, margin, est);
        TingParams t;
        t.a = est.ma;
        t.b = est.phi - est.ma;
        t.omega = std::max(est.mean * (1.0 - est.phi), kCoefFloor);
        // Running conditional means with the threshold switched off.
        double u = t.omega / (1.0 - t.a);
        double top = u;
        for (std::size_t k = 1; k < y.size(); ++k) {
            u = t.psi(u, y[k - 1]);
            top = std::max(top, u);
        }
        t.tau = top;
        return clamp_feasible(t, margin);
    }
    if (nm_dim < 1) throw std::invalid_argument("NM dimension must be >= 1");
    double m2 = 0.0;
    for (double v : y) m2 += v * v;
    m2 /= static_cast<double>(y.size());
    const double d = static_cast<double>(nm_dim);
    NmParams p;
    p.gamma = Eigen::VectorXd::Constant(nm_dim, 1.0 / d);
    p.omega = Eigen::VectorXd::Constant(nm_dim, m2 * (1.0 - 0.5) / d);
    p.A = 0.3 * Eigen::MatrixXd::Identity(nm_dim, nm_dim);
    p.b = Eigen::VectorXd::Constant(nm_dim, 0.2 / d);
    return clamp_feasible(p, margin);
}

FitResult mle_fit(const Series& series, ModelKind kind, const std::optional<State>& x1, const FitOptions& options) {
    series.validate();
    if (series.model != kind) throw std::invalid_argument("series model differs from the requested model");
    const ModelParams start = init_generic(series.y, kind, options.nm_dim, options.margin);
    return mle_fit_from(series, start, x1, options);
}

FitResult mle_fit_from(const Series& series, const ModelParams& start, const std::optional<State>& x1,
                       const FitOptions& options) {
    validate(start);
    if (series.y.empty()) throw std::invalid_argument("cannot fit an empty series");
    const ModelKind kind = kind_of(start);
    const std::span<const double> y(series.y);
    const FeasibleMap map(start);

    FitResult fit;
    fit.model = kind;
    fit.seed = series.seed;
    fit.theta_init = start;
    fit.x1_used = x1 ? *x1 : noise_free_fixed_point(start);
    if (fit.x1_used.size() != state_dim(start) || (fit.x1_used.array() <= 0.0).any()) {
        throw std::invalid_argument("x1 must have positive components matching the model");
    }
    fit.loglik_init = loglik(start, fit.x1_used, y).value;

    const State& x1v = fit.x1_used;
    auto decode = [&](const Eigen::VectorXd& z) { return map.decode(z.cwiseMax(-kZLimit).cwiseMin(kZLimit)); };
    auto neg_loglik = [&](const Eigen::VectorXd& z) { return -loglik_unchecked(decode(z), x1v, y); };

    DifferentiableFn objective;
    DifferentiableFn constraint;
    if (kind == ModelKind::nbin) {
        objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
            const auto p = std::get<NbinParams>(decode(z));
            if (!grad) {
                return -loglik_unchecked(p, x1v, y);
            }
            const NbinLoglikGrad lg = nbin_loglik_grad(p, x1v[0], y);
            if (!std::isfinite(lg.value)) return std::numeric_limits<double>::infinity();
            *grad = -(lg.grad.array() * Eigen::Array4d(p.omega, p.a, p.b, p.r)).matrix();
            return -lg.value;
        };
        constraint = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
            const auto p = std::get<NbinParams>(decode(z));
            if (grad) *grad = Eigen::Vector4d(0.0, p.a, p.b * p.r, p.b * p.r);
            return p.a + p.b * p.r - (1.0 - options.margin);
        };
    } else {
        const double h = options.fd_step;
        objective = [&, h](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
            const double v = neg_loglik(z);
            if (grad && std::isfinite(v)) *grad = central_difference(neg_loglik, z, h);
            return v;
        };
        if (kind == ModelKind::ting) {
            constraint = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
                const auto t = std::get<TingParams>(decode(z));
                if (grad) *grad = Eigen::Vector4d(0.0, t.a, 0.0, 0.0);
                return t.a - (1.0 - options.margin);
            };
        } else {
            auto rho = [&](const Eigen::VectorXd& z) {
                const auto nm = std::get<NmParams>(decode(z));
                return spectral_radius(nm.companion(), 1e-15).value;
            };
            constraint = [&, h, rho](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
                if (grad) *grad = central_difference(rho, z, h);
                return rho(z) - (1.0 - options.margin);
            };
        }
    }

    AugLagOptions al;
    al.max_outer = options.max_outer;
    al.kkt_tol = options.tol;
    al.inner.max_iter = options.max_inner;
    al.inner.grad_tol = 0.1 * options.tol;
    const AugLagResult res = minimize_auglag(objective, constraint, map.encode(start), al);

    ModelParams hat = decode(res.x);
    bool converged = res.converged;
    if (constraint_value(hat, options.margin) > 0.0) {
        hat = clamp_feasible(hat, options.margin);
    }
    double ll_hat = loglik(hat, x1v, y).value;
    if (!(ll_hat >= fit.loglik_init)) {
        // Best feasible iterate is the starting point.
        hat = start;
        ll_hat = fit.loglik_init;
        converged = false;
    }
    fit.theta_hat = hat;
    fit.loglik_hat = ll_hat;
    fit.n_outer = res.n_outer;
    fit.n_inner = res.n_inner;
    fit.converged = converged;
    fit.kkt_norm = res.kkt_norm;
    fit.constraint_margin = stability_check(hat).margin;
    fit.outer_loglik.reserve(res.outer_objective.size());
    for (double v : res.outer_objective) fit.outer_loglik.push_back(-v);
    return fit;
}

nlohmann::json to_json(const FitResult& fit) {
    nlohmann::json j;
    j["model"] = std::string(to_string(fit.model));
    j["theta_init"] = params_to_json(fit.theta_init);
    j["theta_hat"] = params_to_json(fit.theta_hat);
    j["loglik_init"] = fit.loglik_init;
    j["loglik_hat"] = fit.loglik_hat;
    j["converged"] = fit.converged;
    j["n_outer"] = fit.n_outer;
    j["n_inner"] = fit.n_inner;
    j["constraint_margin"] = fit.constraint_margin;
    j["x1"] = state_to_json(fit.x1_used);
    j["seed"] = fit.seed;
    return j;
}

}  // namespace odgarch
