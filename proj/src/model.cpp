#include "odgarch/model.hpp"

#include "odgarch/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace odgarch {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double v, const char* name) {
    if (!std::isfinite(v) || !(v > 0.0)) {
        throw std::invalid_argument(std::string(name) + " must be finite and > 0");
    }
}

void require_scalar_state(const State& x) {
    if (x.size() != 1) {
        throw std::invalid_argument("state dimension mismatch: expected a scalar state");
    }
    if (!std::isfinite(x[0]) || !(x[0] > 0.0)) {
        throw std::invalid_argument("state must be finite and > 0");
    }
}

void require_count(double y) {
    if (!std::isfinite(y) || y < 0.0 || y != std::floor(y)) {
        throw std::invalid_argument("count observation must be a non-negative integer");
    }
}

double nbin_log_pmf(const NbinParams& p, double x, double y) {
    double out = log_gamma(y + p.r) - log_gamma(y + 1.0) - log_gamma(p.r) - p.r * std::log1p(x);
    if (y > 0.0) out += y * (std::log(x) - std::log1p(x));
    return out;
}

double ting_log_pmf(const TingParams& p, double x, double y) {
    const double rate = std::min(x, p.tau);
    return y * std::log(rate) - rate - log_gamma(y + 1.0);
}

double nm_log_density(const NmParams& p, const State& x, double y) {
    const double y2 = y * y;
    double max_term = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd terms(p.dim());
    for (int l = 0; l < p.dim(); ++l) {
        if (p.gamma[l] > 0.0) {
            terms[l] = std::log(p.gamma[l]) - 0.5 * y2 / x[l] -
                       0.5 * std::log(2.0 * std::numbers::pi * x[l]);
        } else {
            terms[l] = -std::numeric_limits<double>::infinity();
        }
        max_term = std::max(max_term, terms[l]);
    }
    double acc = 0.0;
    for (int l = 0; l < p.dim(); ++l) acc += std::exp(terms[l] - max_term);
    return max_term + std::log(acc);
}

}  // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::nbin: return "nbin";
        case ModelKind::nm: return "nm";
        case ModelKind::ting: return "ting";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "nbin") return ModelKind::nbin;
    if (name == "nm") return ModelKind::nm;
    if (name == "ting") return ModelKind::ting;
    throw std::invalid_argument("unknown model '" + std::string(name) + "' (expected nbin|nm|ting)");
}

void NbinParams::validate() const {
    require_positive(omega, "omega");
    require_positive(a, "a");
    require_positive(b, "b");
    require_positive(r, "r");
}

void TingParams::validate() const {
    require_positive(omega, "omega");
    require_positive(a, "a");
    require_positive(b, "b");
    require_positive(tau, "tau");
}

void NmParams::validate() const {
    const int d = dim();
    if (d < 1) throw std::invalid_argument("NM dimension must be >= 1");
    if (gamma.size() != d || b.size() != d || A.rows() != d || A.cols() != d) {
        throw std::invalid_argument("NM parameter shapes disagree with d = " + std::to_string(d));
    }
    for (int l = 0; l < d; ++l) {
        require_positive(omega[l], "omega component");
        if (!std::isfinite(gamma[l]) || gamma[l] < 0.0) {
            throw std::invalid_argument("gamma entries must be >= 0");
        }
        if (!std::isfinite(b[l]) || b[l] < 0.0) {
            throw std::invalid_argument("b entries must be >= 0");
        }
        for (int c = 0; c < d; ++c) {
            if (!std::isfinite(A(l, c)) || A(l, c) < 0.0) {
                throw std::invalid_argument("A entries must be >= 0");
            }
        }
    }
    if (std::fabs(gamma.sum() - 1.0) > 1e-9) {
        throw std::invalid_argument("gamma must sum to 1");
    }
}

double NmParams::stability_margin() const {
    return 1.0 - spectral_radius(companion()).value;
}

ModelKind kind_of(const ModelParams& params) noexcept {
    switch (params.index()) {
        case 0: return ModelKind::nbin;
        case 1: return ModelKind::nm;
        default: return ModelKind::ting;
    }
}

int state_dim(const ModelParams& params) noexcept {
    if (const auto* nm = std::get_if<NmParams>(&params)) return nm->dim();
    return 1;
}

void validate(const ModelParams& params) {
    std::visit([](const auto& p) { p.validate(); }, params);
}

bool is_count_model(ModelKind kind) noexcept { return kind != ModelKind::nm; }

State scalar_state(double x) {
    State s(1);
    s[0] = x;
    return s;
}

SpectralRadius spectral_radius(const Eigen::MatrixXd& m, double tol, int max_iter) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw std::invalid_argument("spectral_radius: matrix must be square and non-empty");
    }
    const Eigen::Index d = m.rows();
    const Eigen::MatrixXd shifted = m + Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd v = Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d));
    double prev = -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd w = shifted * v;
        const double norm = w.sum();  // entries stay non-negative
        const double rho = norm - 1.0;
        v = w / norm;
        if (std::fabs(rho - prev) < tol * std::max(1.0, std::fabs(rho))) {
            return {std::max(rho, 0.0), it, true};
        }
        prev = rho;
    }
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    const double norm_inf = m.cwiseAbs().rowwise().sum().maxCoeff();
    return {std::min(norm1, norm_inf), max_iter, false};
}

Stability stability_check(const ModelParams& params) {
    const double margin = std::visit([](const auto& p) { return p.stability_margin(); }, params);
    return {margin > 0.0, margin};
}

State noise_free_fixed_point(const ModelParams& params) {
    return std::visit(
        overloaded{
            [](const NmParams& p) -> State {
                if (!(spectral_radius(p.A).value < 1.0)) {
                    throw std::domain_error("noise-free recursion has no fixed point for rho(A) >= 1");
                }
                const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(p.dim(), p.dim()) - p.A;
                return lhs.partialPivLu().solve(p.omega);
            },
            [](const auto& p) -> State {
                if (!(p.a < 1.0)) {
                    throw std::domain_error("noise-free recursion has no fixed point for a >= 1");
                }
                return scalar_state(p.omega / (1.0 - p.a));
            },
        },
        params);
}

State psi_step(const ModelParams& params, const State& x, double y) {
    return std::visit(
        overloaded{
            [&](const NmParams& p) -> State {
                if (x.size() != p.dim()) {
                    throw std::invalid_argument("state dimension mismatch for NM model");
                }
                return p.omega + p.A * x + (y * y) * p.b;
            },
            [&](const auto& p) -> State {
                if (x.size() != 1) {
                    throw std::invalid_argument("state dimension mismatch: expected a scalar state");
                }
                return scalar_state(p.psi(x[0], y));
            },
        },
        params);
}

double log_emission(const ModelParams& params, const State& x, double y) {
    return std::visit(
        overloaded{
            [&](const NbinParams& p) {
                require_scalar_state(x);
                require_count(y);
                return nbin_log_pmf(p, x[0], y);
            },
            [&](const TingParams& p) {
                require_scalar_state(x);
                require_count(y);
                return ting_log_pmf(p, x[0], y);
            },
            [&](const NmParams& p) {
                if (x.size() != p.dim()) {
                    throw std::invalid_argument("state dimension mismatch for NM model");
                }
                if (!std::isfinite(y) || !x.allFinite() || (x.array() <= 0.0).any()) {
                    throw std::invalid_argument("NM emission needs finite y and positive finite state");
                }
                return nm_log_density(p, x, y);
            },
        },
        params);
}

double sample_emission(const ModelParams& params, const State& x, Rng& rng) {
    return std::visit(
        overloaded{
            [&](const NbinParams& p) {
                require_scalar_state(x);
                // NB(r, x/(1+x)) as a Gamma(r, scale x) mixture of Poissons.
                return rng.poisson(x[0] * rng.gamma(p.r));
            },
            [&](const TingParams& p) {
                require_scalar_state(x);
                return rng.poisson(std::min(x[0], p.tau));
            },
            [&](const NmParams& p) {
                if (x.size() != p.dim() || (x.array() <= 0.0).any()) {
                    throw std::invalid_argument("NM state must have d positive components");
                }
                const double u = rng.uniform();
                int comp = p.dim() - 1;
                double cdf = 0.0;
                for (int l = 0; l < p.dim(); ++l) {
                    cdf += p.gamma[l];
                    if (u < cdf) {
                        comp = l;
                        break;
                    }
                }
                return std::sqrt(x[comp]) * rng.normal();
            },
        },
        params);
}

double conditional_moment(const ModelParams& params, const State& x) {
    return std::visit(
        overloaded{
            [&](const NbinParams& p) { return p.r * x[0]; },
            [&](const TingParams& p) { return std::min(x[0], p.tau); },
            [&](const NmParams& p) { return p.gamma.dot(x); },
        },
        params);
}

void Series::validate() const {
    if (x_trace && static_cast<std::size_t>(x_trace->rows()) != y.size()) {
        throw std::invalid_argument("x_trace length differs from y length");
    }
    if (is_count_model(model)) {
        for (double v : y) require_count(v);
    } else {
        for (double v : y) {
            if (!std::isfinite(v)) throw std::invalid_argument("observations must be finite");
        }
    }
}

Series simulate(const ModelParams& params, std::size_t n, std::uint64_t seed,
                const SimulateOptions& options) {
    validate(params);
    if (n == 0) throw std::invalid_argument("simulate: n must be >= 1");
    if (options.burn_in < 0) throw std::invalid_argument("simulate: burn_in must be >= 0");

    const int d = state_dim(params);
    State x;
    if (options.x0) {
        x = *options.x0;
    } else {
        try {
            x = noise_free_fixed_point(params);
        } catch (const std::domain_error&) {
            x = std::visit(overloaded{[](const NmParams& p) -> State { return p.omega; },
                                      [](const auto& p) -> State { return scalar_state(p.omega); }},
                           params);
        }
    }
    if (x.size() != d || !x.allFinite() || (x.array() <= 0.0).any()) {
        throw std::invalid_argument("simulate: x0 must have positive finite components matching the model");
    }

    Series out;
    out.model = kind_of(params);
    out.seed = seed;
    out.params = params;
    out.burn_in = options.burn_in;
    out.stable = stability_check(params).stable;
    out.y.resize(n);
    Eigen::MatrixXd trace(static_cast<Eigen::Index>(n), d);

    Rng rng(seed);
    const std::size_t total = n + static_cast<std::size_t>(options.burn_in);
    for (std::size_t k = 0; k < total; ++k) {
        // Mixing draws scale the state, so stop well before the double range ends.
        if (!x.allFinite() || x.maxCoeff() > 1e300) {
            throw std::overflow_error("simulate: state diverged at step " + std::to_string(k));
        }
        const double y = sample_emission(params, x, rng);
        if (!std::isfinite(y)) throw std::overflow_error("simulate: observation diverged at step " + std::to_string(k));
        if (k >= static_cast<std::size_t>(options.burn_in)) {
            const auto row = static_cast<Eigen::Index>(k - static_cast<std::size_t>(options.burn_in));
            out.y[static_cast<std::size_t>(row)] = y;
            trace.row(row) = x.transpose();
        }
        x = psi_step(params, x, y);
    }
    out.x_trace = std::move(trace);
    return out;
}

}  // namespace odgarch
