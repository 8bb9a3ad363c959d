#include "odgarch/verifier.hpp"

#include "odgarch/io.hpp"
#include "odgarch/special_functions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace odgarch {

namespace {

constexpr std::array<int, 16> kPrimes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
constexpr double kUnitRoundoff = std::numeric_limits<double>::epsilon();

/// Per-model lower corner of the state box and observation nodes.
struct Sampler {
    const ModelParams& params;
    const GridSpec& grid;
    int d;
    Eigen::VectorXd lo;
    std::vector<double> y_nodes;
    HaltonSequence halton;

    Sampler(const ModelParams& p, const GridSpec& g)
        : params(p), grid(g), d(state_dim(p)), halton(2 * state_dim(p) + 1, g.seed) {
        lo.resize(d);
        if (const auto* nm = std::get_if<NmParams>(&params)) {
            lo = nm->omega;
        } else {
            lo[0] = std::visit([](const auto& q) -> double {
                if constexpr (requires { q.tau; q.omega; }) return q.omega;
                else if constexpr (requires { q.r; q.omega; }) return q.omega;
                else return 1.0;
            }, params);
        }
        if (!is_count_model(kind_of(params))) {
            const auto nodes = gauss_hermite_nodes(grid.n_y_nodes);
            const double scale = std::sqrt(2.0 * grid.x_hi);
            for (double t : nodes) y_nodes.push_back(t * scale);
        }
    }

    double to_state(double u, Eigen::Index comp) const {
        const double l = lo[comp];
        const double h = std::max(grid.x_hi, 10.0 * l);
        return l * std::pow(h / l, u);
    }

    double to_obs(double u) const {
        if (is_count_model(kind_of(params))) {
            return std::min(std::floor(u * (grid.y_max + 1)), static_cast<double>(grid.y_max));
        }
        const auto idx = std::min(static_cast<std::size_t>(u * static_cast<double>(y_nodes.size())),
                                  y_nodes.size() - 1);
        return y_nodes[idx];
    }

    struct Triple {
        State x;
        State xp;
        double y;
    };

    Triple triple(std::size_t i) const {
        const auto u = halton.point(i + 1);
        Triple t{State(d), State(d), 0.0};
        for (int c = 0; c < d; ++c) {
            t.x[c] = to_state(u[static_cast<std::size_t>(c)], c);
            t.xp[c] = to_state(u[static_cast<std::size_t>(d + c)], c);
        }
        t.y = to_obs(u[static_cast<std::size_t>(2 * d)]);
        return t;
    }
};

void tally(CheckRecord& rec, double slack) {
    ++rec.n_samples;
    if (rec.n_samples == 1 || slack < rec.worst_slack) rec.worst_slack = slack;
    if (slack < 0.0) ++rec.n_violations;
}

void finish(CheckRecord& rec) { rec.passed = rec.n_violations == 0; }

/// Left Perron vector of A + eps J, positive by construction, l1-normalized.
Eigen::VectorXd contraction_weights(const Eigen::MatrixXd& a) {
    const Eigen::Index d = a.rows();
    const double rho_a = spectral_radius(a, 1e-14).value;
    double eps = std::max(1e-12, (1.0 - rho_a) / (4.0 * static_cast<double>(d)));
    Eigen::MatrixXd m = a.transpose() + eps * Eigen::MatrixXd::Ones(d, d);
    while (spectral_radius(m, 1e-14).value >= 1.0 && eps > 1e-12) {
        eps *= 0.5;
        m = a.transpose() + eps * Eigen::MatrixXd::Ones(d, d);
    }
    const Eigen::MatrixXd shifted = m + Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d));
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd next = shifted * w;
        next /= next.sum();
        const double change = (next - w).lpNorm<1>();
        w = next;
        if (change < 1e-15) break;
    }
    return w;
}

double weighted_l1(const Eigen::VectorXd& w, const Eigen::VectorXd& z) { return w.dot(z.cwiseAbs()); }

double log_h(const ModelParams& params, double t, double y) {
    if (const auto* p = std::get_if<NbinParams>(&params)) {
        double out = log_gamma(y + p->r) - log_gamma(y + 1.0) - log_gamma(p->r);
        if (y > 0.0) out += y * (std::log(t) - std::log1p(t));
        return out;
    }
    if (const auto* q = std::get_if<TingParams>(&params)) {
        return y * std::log(std::min(t, q->tau)) - log_gamma(y + 1.0);
    }
    return -0.5 * y * y / t;
}

}  // namespace

HaltonSequence::HaltonSequence(int dims, std::uint64_t seed) : dims_(dims) {
    if (dims < 1 || dims > static_cast<int>(kPrimes.size())) {
        throw std::invalid_argument("HaltonSequence supports 1..16 dimensions");
    }
    Rng rng(splitmix64(seed));
    for (int k = 0; k < dims; ++k) {
        const int base = kPrimes[static_cast<std::size_t>(k)];
        std::vector<int> perm(static_cast<std::size_t>(base));
        std::iota(perm.begin(), perm.end(), 0);
        // Fisher–Yates on the non-zero digits keeps 0 fixed, so trailing zeros add nothing.
        for (int i = base - 1; i > 1; --i) {
            const auto j = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i));
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
        }
        perms_.push_back(std::move(perm));
    }
}

std::vector<double> HaltonSequence::point(std::uint64_t index) const {
    std::vector<double> out(static_cast<std::size_t>(dims_));
    for (int k = 0; k < dims_; ++k) {
        const auto base = static_cast<std::uint64_t>(kPrimes[static_cast<std::size_t>(k)]);
        const auto& perm = perms_[static_cast<std::size_t>(k)];
        double inv = 1.0 / static_cast<double>(base);
        double f = inv;
        double v = 0.0;
        for (std::uint64_t i = index; i > 0; i /= base) {
            v += f * perm[i % base];
            f *= inv;
        }
        out[static_cast<std::size_t>(k)] = v;
    }
    return out;
}

std::vector<double> gauss_hermite_nodes(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite_nodes: n must be >= 1");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

double minorization_alpha(const ModelParams& params, const State& x, const State& xp) {
    if (const auto* p = std::get_if<NbinParams>(&params)) {
        const double lo = std::min(x[0], xp[0]);
        const double hi = std::max(x[0], xp[0]);
        return std::pow((1.0 + lo) / (1.0 + hi), p->r);
    }
    if (const auto* t = std::get_if<TingParams>(&params)) {
        const double lo = std::min(x[0], xp[0]);
        const double hi = std::max(x[0], xp[0]);
        return std::exp(-std::min(hi, t->tau) + std::min(lo, t->tau));
    }
    double alpha = 1.0;
    for (Eigen::Index l = 0; l < x.size(); ++l) {
        alpha = std::min(alpha, std::sqrt(std::min(x[l], xp[l]) / std::max(x[l], xp[l])));
    }
    return alpha;
}

State minorization_phi(const State& x, const State& xp) { return x.cwiseMin(xp); }

CheckRecord check_contraction(const ModelParams& params, const GridSpec& grid) {
    validate(params);
    CheckRecord rec;
    rec.name = "contraction";
    const Sampler s(params, grid);

    if (const auto* nm = std::get_if<NmParams>(&params)) {
        const Eigen::VectorXd w = contraction_weights(nm->A);
        // Induced weighted-l1 norm of A: max_j (w^T A)_j / w_j.
        const Eigen::VectorXd col = (w.transpose() * nm->A).transpose();
        const double rate = col.cwiseQuotient(w).maxCoeff();
        rec.constants["rate"] = rate;
        rec.constants["norm"] = "weighted l1, weights = left Perron vector of A + eps J";
        rec.constants["weights"] = state_to_json(w);
        rec.constants["norm_equivalence_c"] = 1.0 / w.minCoeff();
        if (!(rate < 1.0)) {
            rec.n_violations = 1;
            rec.worst_slack = 1.0 - rate;
            rec.reason = "no contracting weighted norm found";
            finish(rec);
            return rec;
        }
        for (std::size_t i = 0; i < grid.n_triples; ++i) {
            const auto t = s.triple(i);
            const Eigen::VectorXd diff = t.x - t.xp;
            const double den = weighted_l1(w, diff);
            if (den == 0.0) continue;
            const State px = psi_step(params, t.x, t.y);
            const State pxp = psi_step(params, t.xp, t.y);
            const double ratio = weighted_l1(w, px - pxp) / den;
            const double rounding = 8.0 * kUnitRoundoff * (weighted_l1(w, px) + weighted_l1(w, pxp)) / den;
            tally(rec, rate + 1e-12 + rounding - ratio);
        }
        finish(rec);
        return rec;
    }

    const double a = std::visit([](const auto& q) -> double {
        if constexpr (requires { q.a; }) return q.a;
        else return 0.0;
    }, params);
    rec.constants["rate"] = a;
    for (std::size_t i = 0; i < grid.n_triples; ++i) {
        const auto t = s.triple(i);
        const double dx = std::fabs(t.x[0] - t.xp[0]);
        if (dx == 0.0) continue;
        const double px = psi_step(params, t.x, t.y)[0];
        const double pxp = psi_step(params, t.xp, t.y)[0];
        const double ratio = std::fabs(px - pxp) / dx;
        // Cancellation in psi(x) - psi(x') is bounded by a few ulps of the operands.
        const double rounding = 8.0 * kUnitRoundoff * (std::fabs(px) + std::fabs(pxp) + t.x[0] + t.xp[0]) / dx;
        tally(rec, 1e-12 + rounding - std::fabs(ratio - a));
    }
    finish(rec);
    return rec;
}

CheckRecord check_drift(const ModelParams& params, const GridSpec& grid) {
    validate(params);
    CheckRecord rec;
    rec.name = "drift";
    if (!stability_check(params).stable) {
        rec.skipped = true;
        rec.reason = "parameters are not stable; the drift inequality need not close";
        finish(rec);
        return rec;
    }
    const Sampler s(params, grid);
    const int d = state_dim(params);

    // V, closed-form RV and (lambda, beta) per model.
    std::function<double(const State&)> lyap;
    std::function<double(const State&)> rv;
    double lambda = 0.0;
    double beta = 0.0;
    if (const auto* p = std::get_if<NbinParams>(&params)) {
        lyap = [](const State& x) { return x[0]; };
        rv = [p](const State& x) { return p->omega + (p->a + p->b * p->r) * x[0]; };
        lambda = p->a + p->b * p->r;
        beta = p->omega;
        rec.constants["V"] = "V(x) = x";
    } else if (const auto* t = std::get_if<TingParams>(&params)) {
        lyap = [](const State& x) { return x[0]; };
        rv = [t](const State& x) { return t->omega + t->a * x[0] + t->b * std::min(x[0], t->tau); };
        lambda = t->a;
        beta = t->omega + t->b * t->tau;
        rec.constants["V"] = "V(x) = x";
    } else {
        const auto& nm = std::get<NmParams>(params);
        const Eigen::MatrixXd m = nm.companion();
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d);
        const Eigen::VectorXd weights =
            (Eigen::MatrixXd::Identity(d, d) - m.transpose()).partialPivLu().solve(ones);  // 1 + x0
        const Eigen::VectorXd x0 = weights - ones;
        lyap = [weights](const State& x) { return weights.dot(x); };
        const double v_omega = weights.dot(nm.omega);
        rv = [v_omega, x0](const State& x) { return v_omega + x0.dot(x); };
        lambda = 0.0;
        for (int l = 0; l < d; ++l) lambda = std::max(lambda, x0[l] / (1.0 + x0[l]));
        beta = v_omega;
        rec.constants["V"] = "V(x) = (1 + x0)^T x, 1 + x0 = (I - (A + b gamma^T)^T)^{-1} 1";
        rec.constants["x0"] = state_to_json(x0);
        // Second route: (1 + x0)^T (omega + A x + (gamma^T x) b) must match the closed form.
        const auto direct = [weights, nm](const State& x) {
            return weights.dot(nm.omega + nm.A * x + nm.gamma.dot(x) * nm.b);
        };
        for (std::size_t i = 0; i < grid.n_triples; ++i) {
            const State x = s.triple(i).x;
            const double a1 = rv(x);
            const double a2 = direct(x);
            if (std::fabs(a1 - a2) > 1e-9 * (1.0 + std::fabs(a1))) ++rec.n_violations;
        }
    }
    rec.constants["lambda"] = lambda;
    rec.constants["beta"] = beta;
    if (!(lambda < 1.0)) {
        ++rec.n_violations;
        rec.reason = "lambda >= 1";
    }

    for (std::size_t i = 0; i < grid.n_triples; ++i) {
        const State x = s.triple(i).x;
        const double lhs = rv(x);
        const double rhs = lambda * lyap(x) + beta;
        tally(rec, rhs - lhs + 1e-10 * (1.0 + std::fabs(lhs)));
    }

    // Monte Carlo cross-check of the closed-form RV.
    Rng rng(splitmix64(grid.seed ^ 0xD21F7ULL));
    std::size_t mc_fail = 0;
    double worst_z = 0.0;
    const std::size_t stride = std::max<std::size_t>(1, grid.n_triples / std::max<std::size_t>(1, grid.n_drift_mc_points));
    for (std::size_t p = 0; p < grid.n_drift_mc_points; ++p) {
        const State x = s.triple(p * stride).x;
        double sum = 0.0;
        double sum2 = 0.0;
        for (std::size_t k = 0; k < grid.n_drift_mc_draws; ++k) {
            const double y = sample_emission(params, x, rng);
            const double v = lyap(psi_step(params, x, y));
            sum += v;
            sum2 += v * v;
        }
        const auto m = static_cast<double>(grid.n_drift_mc_draws);
        const double mean = sum / m;
        const double var = std::max(0.0, sum2 / m - mean * mean);
        const double se = std::sqrt(var / m);
        const double z = std::fabs(mean - rv(x)) / std::max(se, 1e-300);
        worst_z = std::max(worst_z, z);
        if (std::fabs(mean - rv(x)) > 4.0 * se + 1e-12 * (1.0 + std::fabs(mean))) ++mc_fail;
    }
    rec.constants["mc_points"] = grid.n_drift_mc_points;
    rec.constants["mc_draws"] = grid.n_drift_mc_draws;
    rec.constants["mc_worst_z"] = worst_z;
    rec.constants["mc_failures"] = mc_fail;
    rec.n_violations += mc_fail;
    finish(rec);
    return rec;
}

CheckRecord check_minorization(const ModelParams& params, const GridSpec& grid) {
    validate(params);
    CheckRecord rec;
    rec.name = "minorization";
    const Sampler s(params, grid);
    for (std::size_t i = 0; i < grid.n_triples; ++i) {
        const auto t = s.triple(i);
        const double alpha = minorization_alpha(params, t.x, t.xp);
        const State phi = minorization_phi(t.x, t.xp);
        const bool symmetric = alpha == minorization_alpha(params, t.xp, t.x) && phi == minorization_phi(t.xp, t.x);
        if (!(alpha > 0.0 && alpha <= 1.0) || !symmetric) {
            tally(rec, -1.0);
            continue;
        }
        const double gx = std::exp(log_emission(params, t.x, t.y));
        const double gxp = std::exp(log_emission(params, t.xp, t.y));
        const double gphi = std::exp(log_emission(params, phi, t.y));
        tally(rec, std::min(gx, gxp) - alpha * gphi + 1e-12);
    }
    if (kind_of(params) == ModelKind::nbin) {
        rec.constants["alpha"] = "((1 + min(x,x')) / (1 + max(x,x')))^r";
        rec.constants["W"] = std::max(1.0, std::get<NbinParams>(params).r);
    } else if (kind_of(params) == ModelKind::ting) {
        rec.constants["alpha"] = "exp(-min(max(x,x'), tau) + min(min(x,x'), tau))";
        rec.constants["W"] = 1.0;
    } else {
        rec.constants["alpha"] = "min_l sqrt(min(x_l,x'_l) / max(x_l,x'_l))";
        rec.constants["W"] = "1 v (c_d min_l (1/x_l ^ 1/x'_l)); c_d is computed by the contraction check, not certified";
    }
    rec.constants["phi"] = "componentwise min(x, x')";
    finish(rec);
    return rec;
}

CheckRecord check_lipschitz_logg(const ModelParams& params, const GridSpec& grid) {
    validate(params);
    CheckRecord rec;
    rec.name = "lipschitz_log_g";
    const Sampler s(params, grid);
    std::function<double(double)> k_of_y;
    if (const auto* p = std::get_if<NbinParams>(&params)) {
        const double r = p->r;
        const double w = p->omega;
        k_of_y = [r, w](double y) { return r + y * (1.0 + 1.0 / w); };
        rec.constants["K"] = "r + y (1 + 1/omega)";
    } else if (const auto* t = std::get_if<TingParams>(&params)) {
        const double lo = std::min(t->omega, t->tau);
        k_of_y = [lo](double y) { return 1.0 + y / lo; };
        rec.constants["K"] = "1 + y / min(omega, tau)";
    } else {
        const double w = std::get<NmParams>(params).omega.minCoeff();
        k_of_y = [w](double y) { return 0.5 * (y * y / (w * w) + 1.0 / w); };
        rec.constants["K"] = "(y^2 / omega_min^2 + 1 / omega_min) / 2, l1 distance";
    }
    rec.constants["H"] = "H(u) = u";
    rec.constants["C"] = 0.0;
    for (std::size_t i = 0; i < grid.n_triples; ++i) {
        const auto t = s.triple(i);
        if (((t.x - s.lo).array() < 0.0).any() || ((t.xp - s.lo).array() < 0.0).any()) {
            throw std::logic_error("lipschitz grid point outside [omega, inf)");
        }
        const double lhs = std::fabs(log_emission(params, t.x, t.y) - log_emission(params, t.xp, t.y));
        const double rhs = k_of_y(t.y) * (t.x - t.xp).lpNorm<1>();
        tally(rec, rhs - lhs + 1e-10);
    }
    finish(rec);
    return rec;
}

CheckRecord check_h_monotone(const ModelParams& params, const GridSpec& grid) {
    validate(params);
    CheckRecord rec;
    rec.name = "h_monotone";
    const Sampler s(params, grid);
    for (std::size_t i = 0; i < grid.n_triples; ++i) {
        const auto t = s.triple(i);
        for (Eigen::Index c = 0; c < t.x.size(); ++c) {
            const double lo = std::min(t.x[c], t.xp[c]);
            const double hi = std::max(t.x[c], t.xp[c]);
            const double hlo = log_h(params, lo, t.y);
            const double hhi = log_h(params, hi, t.y);
            tally(rec, hhi - hlo + 1e-12 * (1.0 + std::fabs(hlo)));
        }
    }
    finish(rec);
    return rec;
}

bool VerifierReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.passed; });
}

std::size_t VerifierReport::total_violations() const {
    std::size_t total = 0;
    for (const auto& c : checks) total += c.n_violations;
    return total;
}

VerifierReport verify_all(const ModelParams& params, const GridSpec& grid) {
    VerifierReport report;
    report.model = kind_of(params);
    report.params = params;
    report.checks.push_back(check_contraction(params, grid));
    report.checks.push_back(check_drift(params, grid));
    report.checks.push_back(check_minorization(params, grid));
    report.checks.push_back(check_lipschitz_logg(params, grid));
    report.checks.push_back(check_h_monotone(params, grid));
    std::sort(report.checks.begin(), report.checks.end(),
              [](const CheckRecord& l, const CheckRecord& r) { return l.name < r.name; });
    return report;
}

nlohmann::json to_json(const CheckRecord& check) {
    nlohmann::json j;
    j["name"] = check.name;
    j["n_samples"] = check.n_samples;
    j["n_violations"] = check.n_violations;
    j["worst_slack"] = check.worst_slack;
    j["passed"] = check.passed;
    j["skipped"] = check.skipped;
    if (!check.reason.empty()) j["reason"] = check.reason;
    j["constants"] = check.constants;
    return j;
}

nlohmann::json to_json(const VerifierReport& report) {
    nlohmann::json j;
    j["model"] = std::string(to_string(report.model));
    j["params"] = params_to_json(report.params);
    j["stability"] = {{"stable", stability_check(report.params).stable},
                      {"margin", stability_check(report.params).margin}};
    j["not_checked"] = {"weak Feller property of the state kernel",
                        "reachability of the noise-free fixed point",
                        "moment conditions under the stationary law",
                        "coupling kernel construction"};
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : report.checks) checks.push_back(to_json(c));
    j["checks"] = checks;
    j["passed"] = report.passed();
    return j;
}

ModelParams random_stable_params(ModelKind kind, Rng& rng, int nm_dim) {
    auto unif = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    if (kind == ModelKind::nbin) {
        NbinParams p;
        p.omega = unif(0.5, 5.0);
        p.a = unif(0.05, 0.85);
        p.r = unif(0.5, 5.0);
        p.b = (1.0 - p.a) / p.r * unif(0.05, 0.95);
        return p;
    }
    if (kind == ModelKind::ting) {
        return TingParams{unif(0.5, 5.0), unif(0.05, 0.95), unif(0.05, 1.0), unif(0.5, 10.0)};
    }
    for (;;) {
        NmParams p;
        p.gamma.resize(nm_dim);
        for (int l = 0; l < nm_dim; ++l) p.gamma[l] = -std::log(rng.uniform());
        p.gamma /= p.gamma.sum();
        p.omega.resize(nm_dim);
        p.b.resize(nm_dim);
        p.A.resize(nm_dim, nm_dim);
        for (int l = 0; l < nm_dim; ++l) {
            p.omega[l] = unif(0.1, 2.0);
            p.b[l] = unif(0.0, 0.3);
            for (int c = 0; c < nm_dim; ++c) p.A(l, c) = unif(0.0, 0.4);
        }
        if (p.stability_margin() > 0.05) return p;
    }
}

}  // namespace odgarch
