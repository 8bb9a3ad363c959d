#include "odgarch/feasible_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace odgarch {

namespace {

double log_floor(double v) { return std::log(std::max(v, FeasibleMap::kEntryFloor)); }

}  // namespace

FeasibleMap::FeasibleMap(ModelKind kind, int dim) : kind_(kind), dim_(kind == ModelKind::nm ? dim : 1) {
    if (dim_ < 1) throw std::invalid_argument("FeasibleMap: dimension must be >= 1");
}

FeasibleMap::FeasibleMap(const ModelParams& like) : FeasibleMap(kind_of(like), state_dim(like)) {}

int FeasibleMap::size() const noexcept {
    if (kind_ != ModelKind::nm) return 4;
    return (dim_ - 1) + dim_ + dim_ * dim_ + dim_;
}

int FeasibleMap::natural_size() const noexcept {
    if (kind_ != ModelKind::nm) return 4;
    return 3 * dim_ + dim_ * dim_;
}

Eigen::VectorXd FeasibleMap::encode(const ModelParams& params) const {
    if (kind_of(params) != kind_ || state_dim(params) != dim_) {
        throw std::invalid_argument("FeasibleMap::encode: parameter model or dimension mismatch");
    }
    Eigen::VectorXd z(size());
    if (const auto* p = std::get_if<NbinParams>(&params)) {
        z << std::log(p->omega), std::log(p->a), std::log(p->b), std::log(p->r);
    } else if (const auto* t = std::get_if<TingParams>(&params)) {
        z << std::log(t->omega), std::log(t->a), std::log(t->b), std::log(t->tau);
    } else {
        const auto& m = std::get<NmParams>(params);
        const int d = dim_;
        int i = 0;
        const double ref = log_floor(m.gamma[0]);
        for (int l = 1; l < d; ++l) z[i++] = log_floor(m.gamma[l]) - ref;
        for (int l = 0; l < d; ++l) z[i++] = std::log(m.omega[l]);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) z[i++] = log_floor(m.A(r, c));
        }
        for (int l = 0; l < d; ++l) z[i++] = log_floor(m.b[l]);
    }
    return z;
}

ModelParams FeasibleMap::decode(const Eigen::VectorXd& z) const {
    if (z.size() != size()) throw std::invalid_argument("FeasibleMap::decode: wrong vector length");
    if (kind_ == ModelKind::nbin) {
        return NbinParams{std::exp(z[0]), std::exp(z[1]), std::exp(z[2]), std::exp(z[3])};
    }
    if (kind_ == ModelKind::ting) {
        return TingParams{std::exp(z[0]), std::exp(z[1]), std::exp(z[2]), std::exp(z[3])};
    }
    const int d = dim_;
    NmParams m;
    m.gamma.resize(d);
    m.omega.resize(d);
    m.A.resize(d, d);
    m.b.resize(d);
    int i = 0;
    Eigen::VectorXd logits(d);
    logits[0] = 0.0;
    for (int l = 1; l < d; ++l) logits[l] = z[i++];
    const double mx = logits.maxCoeff();
    m.gamma = (logits.array() - mx).exp().matrix();
    m.gamma /= m.gamma.sum();
    for (int l = 0; l < d; ++l) m.omega[l] = std::exp(z[i++]);
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) m.A(r, c) = std::exp(z[i++]);
    }
    for (int l = 0; l < d; ++l) m.b[l] = std::exp(z[i++]);
    return m;
}

Eigen::MatrixXd FeasibleMap::jacobian(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd nat = natural_vector(decode(z));
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(natural_size(), size());
    if (kind_ != ModelKind::nm) {
        for (int i = 0; i < 4; ++i) jac(i, i) = nat[i];
        return jac;
    }
    const int d = dim_;
    // Softmax block: d gamma_l / d logit_m = gamma_l (delta_lm - gamma_m), m >= 1.
    for (int l = 0; l < d; ++l) {
        for (int m = 1; m < d; ++m) {
            jac(l, m - 1) = nat[l] * ((l == m ? 1.0 : 0.0) - nat[m]);
        }
    }
    // Remaining coordinates are log-encoded one-to-one.
    for (int k = 0; k < 2 * d + d * d; ++k) jac(d + k, (d - 1) + k) = nat[d + k];
    return jac;
}

std::vector<std::string> FeasibleMap::natural_names() const {
    if (kind_ == ModelKind::nbin) return {"omega", "a", "b", "r"};
    if (kind_ == ModelKind::ting) return {"omega", "a", "b", "tau"};
    std::vector<std::string> names;
    const int d = dim_;
    for (int l = 1; l <= d; ++l) names.push_back("gamma_" + std::to_string(l));
    for (int l = 1; l <= d; ++l) names.push_back("omega_" + std::to_string(l));
    for (int r = 1; r <= d; ++r) {
        for (int c = 1; c <= d; ++c) names.push_back("A_" + std::to_string(r) + std::to_string(c));
    }
    for (int l = 1; l <= d; ++l) names.push_back("b_" + std::to_string(l));
    return names;
}

Eigen::VectorXd natural_vector(const ModelParams& params) {
    if (const auto* p = std::get_if<NbinParams>(&params)) {
        return Eigen::Vector4d(p->omega, p->a, p->b, p->r);
    }
    if (const auto* t = std::get_if<TingParams>(&params)) {
        return Eigen::Vector4d(t->omega, t->a, t->b, t->tau);
    }
    const auto& m = std::get<NmParams>(params);
    const int d = m.dim();
    Eigen::VectorXd v(3 * d + d * d);
    int i = 0;
    for (int l = 0; l < d; ++l) v[i++] = m.gamma[l];
    for (int l = 0; l < d; ++l) v[i++] = m.omega[l];
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) v[i++] = m.A(r, c);
    }
    for (int l = 0; l < d; ++l) v[i++] = m.b[l];
    return v;
}

std::vector<std::string> natural_names(const ModelParams& params) {
    return FeasibleMap(params).natural_names();
}

}  // namespace odgarch
