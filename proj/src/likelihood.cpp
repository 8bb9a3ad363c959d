#include "odgarch/likelihood.hpp"

#include "odgarch/feasible_map.hpp"
#include "odgarch/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace odgarch {

namespace {

void require_nonempty(std::span<const double> y) {
    if (y.empty()) throw std::invalid_argument("series must be non-empty");
}

void require_state(const ModelParams& params, const State& x) {
    if (x.size() != state_dim(params)) {
        throw std::invalid_argument("state dimension mismatch");
    }
    if (!x.allFinite() || (x.array() <= 0.0).any()) {
        throw std::invalid_argument("state must have positive finite components");
    }
}

double nbin_term(const NbinParams& p, double lg_r, double u, double y) {
    double out = log_gamma(y + p.r) - lg_r - log_gamma(y + 1.0) - p.r * std::log1p(u);
    if (y > 0.0) out += y * (std::log(u) - std::log1p(u));
    return out;
}

}  // namespace

State iterate_f(const ModelParams& params, const State& x, std::span<const double> y) {
    require_state(params, x);
    State cur = x;
    for (double v : y) cur = psi_step(params, cur, v);
    return cur;
}

FilterTrace filter(const ModelParams& params, const State& x1, std::span<const double> y) {
    require_nonempty(y);
    require_state(params, x1);
    const auto n = static_cast<Eigen::Index>(y.size());
    const int d = state_dim(params);

    FilterTrace trace;
    trace.x1 = x1;
    trace.u.resize(n, d);
    trace.u.row(0) = x1.transpose();
    State cur = x1;
    for (Eigen::Index k = 1; k < n; ++k) {
        cur = psi_step(params, cur, y[static_cast<std::size_t>(k - 1)]);
        trace.u.row(k) = cur.transpose();
    }

    if (const auto* p = std::get_if<NbinParams>(&params)) {
        Eigen::MatrixXd du = Eigen::MatrixXd::Zero(n, 3);
        for (Eigen::Index k = 1; k < n; ++k) {
            du(k, 0) = 1.0 + p->a * du(k - 1, 0);
            du(k, 1) = trace.u(k - 1, 0) + p->a * du(k - 1, 1);
            du(k, 2) = y[static_cast<std::size_t>(k - 1)] + p->a * du(k - 1, 2);
        }
        trace.du = std::move(du);
    }
    return trace;
}

LoglikValue loglik(const ModelParams& params, const State& x1, std::span<const double> y) {
    require_nonempty(y);
    require_state(params, x1);
    double acc = 0.0;
    State cur = x1;
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (k > 0) cur = psi_step(params, cur, y[k - 1]);
        acc += log_emission(params, cur, y[k]);
    }
    return {acc / static_cast<double>(y.size()), y.size(), x1};
}

double loglik_unchecked(const ModelParams& params, const State& x1, std::span<const double> y) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    if (y.empty()) return kNegInf;
    const double inv_n = 1.0 / static_cast<double>(y.size());
    if (const auto* p = std::get_if<NbinParams>(&params)) {
        const double lg_r = log_gamma(p->r);
        double u = x1[0];
        double acc = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            if (k > 0) u = p->psi(u, y[k - 1]);
            acc += nbin_term(*p, lg_r, u, y[k]);
        }
        const double out = acc * inv_n;
        return std::isfinite(out) ? out : kNegInf;
    }
    if (const auto* t = std::get_if<TingParams>(&params)) {
        double u = x1[0];
        double acc = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            if (k > 0) u = t->psi(u, y[k - 1]);
            const double rate = std::min(u, t->tau);
            acc += y[k] * std::log(rate) - rate - log_gamma(y[k] + 1.0);
        }
        const double out = acc * inv_n;
        return std::isfinite(out) ? out : kNegInf;
    }
    try {
        double acc = 0.0;
        State cur = x1;
        for (std::size_t k = 0; k < y.size(); ++k) {
            if (k > 0) cur = psi_step(params, cur, y[k - 1]);
            if (!cur.allFinite()) return kNegInf;
            acc += log_emission(params, cur, y[k]);
        }
        const double out = acc * inv_n;
        return std::isfinite(out) ? out : kNegInf;
    } catch (const std::invalid_argument&) {
        return kNegInf;
    }
}

NbinLoglikGrad nbin_loglik_grad(const NbinParams& p, double x1, std::span<const double> y) {
    NbinLoglikGrad out;
    if (y.empty()) return out;
    const double lg_r = log_gamma(p.r);
    const double psi_r = digamma(p.r);
    double u = x1;
    double du_w = 0.0;
    double du_a = 0.0;
    double du_b = 0.0;
    double acc = 0.0;
    double g_w = 0.0;
    double g_a = 0.0;
    double g_b = 0.0;
    double g_r = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (k > 0) {
            const double y_prev = y[k - 1];
            // Sensitivities first: they read u_{k-1}.
            du_w = 1.0 + p.a * du_w;
            du_a = u + p.a * du_a;
            du_b = y_prev + p.a * du_b;
            u = p.psi(u, y_prev);
        }
        const double yk = y[k];
        acc += nbin_term(p, lg_r, u, yk);
        const double score_x = yk / u - (yk + p.r) / (1.0 + u);
        g_w += score_x * du_w;
        g_a += score_x * du_a;
        g_b += score_x * du_b;
        g_r += digamma(p.r + yk) - std::log1p(u);
    }
    const double inv_n = 1.0 / static_cast<double>(y.size());
    out.value = acc * inv_n;
    out.grad << g_w * inv_n, g_a * inv_n, g_b * inv_n, g_r * inv_n - psi_r;
    return out;
}

Eigen::Vector4d grad_loglik_nbin(const NbinParams& params, double x1, std::span<const double> y) {
    require_nonempty(y);
    params.validate();
    if (!(x1 > 0.0) || !std::isfinite(x1)) throw std::invalid_argument("x1 must be positive");
    return nbin_loglik_grad(params, x1, y).grad;
}

Eigen::VectorXd grad_loglik_numeric(const ModelParams& params, const State& x1,
                                    std::span<const double> y, double step) {
    require_nonempty(y);
    require_state(params, x1);
    validate(params);
    if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
    const FeasibleMap map(params);
    const Eigen::VectorXd z = map.encode(params);
    Eigen::VectorXd grad(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        Eigen::VectorXd zp = z;
        Eigen::VectorXd zm = z;
        zp[i] += step;
        zm[i] -= step;
        const ModelParams pp = map.decode(zp);
        const ModelParams pm = map.decode(zm);
        if (!stability_check(pp).stable || !stability_check(pm).stable) {
            throw std::domain_error("grad_loglik_numeric: parameters within one step of the stability boundary");
        }
        grad[i] = (loglik(pp, x1, y).value - loglik(pm, x1, y).value) / (2.0 * step);
    }
    return grad;
}

}  // namespace odgarch
