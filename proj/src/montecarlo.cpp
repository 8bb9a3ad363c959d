#include "odgarch/montecarlo.hpp"

#include "odgarch/feasible_map.hpp"
#include "odgarch/io.hpp"
#include "odgarch/likelihood.hpp"
#include "odgarch/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <thread>

namespace odgarch {

void ExperimentConfig::validate() const {
    odgarch::validate(theta_star);
    if (kind_of(theta_star) != model) throw std::invalid_argument("theta_star does not match the model tag");
    if (!stability_check(theta_star).stable) throw std::invalid_argument("theta_star is not stable");
    if (m < 1) throw std::invalid_argument("m must be at least 1");
    if (sample_sizes.empty()) throw std::invalid_argument("sample_sizes is empty");
    for (auto n : sample_sizes) {
        if (n < 16) throw std::invalid_argument("every sample size must be at least 16");
    }
    if (x1 && x1->size() != state_dim(theta_star)) throw std::invalid_argument("x1 has the wrong dimension");
    if (x1 && !(x1->array() > 0.0).all()) throw std::invalid_argument("x1 must be positive");
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    static const std::vector<std::string> known = {"model", "theta_star", "sample_sizes", "m",
                                                   "base_seed", "x1", "optimizer", "drop_nonconverged"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
    }
    if (!j.contains("model") || !j.contains("theta_star")) {
        throw std::invalid_argument("config needs 'model' and 'theta_star'");
    }
    ExperimentConfig c;
    c.model = parse_model_kind(j.at("model").get<std::string>());
    c.theta_star = params_from_json(c.model, j.at("theta_star"));
    if (j.contains("sample_sizes")) c.sample_sizes = j.at("sample_sizes").get<std::vector<std::size_t>>();
    if (j.contains("m")) c.m = j.at("m").get<std::size_t>();
    if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("x1") && !j.at("x1").is_null()) c.x1 = state_from_json(j.at("x1"));
    if (j.contains("drop_nonconverged")) c.drop_nonconverged = j.at("drop_nonconverged").get<bool>();
    if (c.model == ModelKind::nm) c.optimizer.nm_dim = std::get<NmParams>(c.theta_star).dim();
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        for (const auto& [key, value] : o.items()) {
            if (key == "margin") c.optimizer.margin = value.get<double>();
            else if (key == "tol") c.optimizer.tol = value.get<double>();
            else if (key == "max_outer") c.optimizer.max_outer = value.get<int>();
            else if (key == "max_inner") c.optimizer.max_inner = value.get<int>();
            else if (key == "fd_step") c.optimizer.fd_step = value.get<double>();
            else throw std::invalid_argument("unknown optimizer key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["model"] = std::string(to_string(config.model));
    j["theta_star"] = params_to_json(config.theta_star);
    j["sample_sizes"] = config.sample_sizes;
    j["m"] = config.m;
    j["base_seed"] = config.base_seed;
    j["x1"] = config.x1 ? state_to_json(*config.x1) : nlohmann::json(nullptr);
    j["optimizer"] = {{"margin", config.optimizer.margin},
                      {"tol", config.optimizer.tol},
                      {"max_outer", config.optimizer.max_outer},
                      {"max_inner", config.optimizer.max_inner},
                      {"fd_step", config.optimizer.fd_step}};
    j["drop_nonconverged"] = config.drop_nonconverged;
    return j;
}

Eigen::VectorXd made(const std::vector<ModelParams>& estimates, const ModelParams& theta_star) {
    if (estimates.empty()) throw std::invalid_argument("made: no estimates");
    const Eigen::VectorXd truth = natural_vector(theta_star);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(truth.size());
    for (const auto& e : estimates) {
        if (kind_of(e) != kind_of(theta_star)) throw std::invalid_argument("made: model mismatch");
        const Eigen::VectorXd v = natural_vector(e);
        if (v.size() != truth.size()) throw std::invalid_argument("made: dimension mismatch");
        acc += (v - truth).cwiseAbs();
    }
    return acc / static_cast<double>(estimates.size());
}

double loglik_gap(const Series& series, const ModelParams& theta_hat, const ModelParams& theta_star, const State& x1) {
    if (kind_of(theta_hat) != series.model || kind_of(theta_star) != series.model) {
        throw std::invalid_argument("loglik_gap: model mismatch");
    }
    return loglik(theta_hat, x1, series.y).value - loglik(theta_star, x1, series.y).value;
}

namespace {

ReplicateResult run_replicate(const ExperimentConfig& config, std::size_t n, std::size_t j, int n_params) {
    ReplicateResult out;
    out.n = n;
    out.j = j;
    out.seed = split_seed(config.base_seed, n, j);
    try {
        const Series s = simulate(config.theta_star, n, out.seed);
        const FitResult fit = mle_fit(s, config.model, config.x1, config.optimizer);
        out.converged = fit.converged;
        out.theta_hat = natural_vector(fit.theta_hat);
        out.loglik_gap = loglik_gap(s, fit.theta_hat, config.theta_star, fit.x1_used);
    } catch (const std::exception&) {
        out.failed = true;
        out.converged = false;
        out.theta_hat = Eigen::VectorXd::Constant(n_params, std::numeric_limits<double>::quiet_NaN());
        out.loglik_gap = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

}  // namespace

McSummary run_experiment(const ExperimentConfig& config, unsigned threads, const ProgressFn& progress) {
    config.validate();
    McSummary summary;
    summary.config = config;
    summary.param_names = natural_names(config.theta_star);
    const int n_params = static_cast<int>(summary.param_names.size());
    const std::size_t total = config.sample_sizes.size() * config.m;
    summary.replicates.resize(total);

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    auto worker = [&] {
        for (std::size_t idx = next++; idx < total; idx = next++) {
            const std::size_t n = config.sample_sizes[idx / config.m];
            summary.replicates[idx] = run_replicate(config, n, idx % config.m, n_params);
            const std::size_t finished = ++done;
            if (progress) progress(finished, total);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    const Eigen::VectorXd truth = natural_vector(config.theta_star);
    for (std::size_t s = 0; s < config.sample_sizes.size(); ++s) {
        SampleSizeSummary cell;
        cell.n = config.sample_sizes[s];
        cell.mc_mean = Eigen::VectorXd::Zero(n_params);
        cell.made = Eigen::VectorXd::Zero(n_params);
        for (std::size_t j = 0; j < config.m; ++j) {
            const auto& r = summary.replicates[s * config.m + j];
            if (r.converged) ++cell.n_converged;
            if (r.failed || (config.drop_nonconverged && !r.converged)) continue;
            cell.mc_mean += r.theta_hat;
            cell.made += (r.theta_hat - truth).cwiseAbs();
            ++cell.n_used;
        }
        const double denom = cell.n_used > 0 ? static_cast<double>(cell.n_used)
                                             : std::numeric_limits<double>::quiet_NaN();
        cell.mc_mean /= denom;
        cell.made /= denom;
        summary.by_n.push_back(std::move(cell));
    }
    return summary;
}

std::string summary_to_csv(const McSummary& summary) {
    const std::string model(to_string(summary.config.model));
    std::string out = "model,n,param,mc_mean,made,n_converged\n";
    for (const auto& cell : summary.by_n) {
        for (std::size_t p = 0; p < summary.param_names.size(); ++p) {
            const auto i = static_cast<Eigen::Index>(p);
            out += model + ',' + std::to_string(cell.n) + ',' + summary.param_names[p] + ',' +
                   format_number(cell.mc_mean[i]) + ',' + format_number(cell.made[i]) + ',' +
                   std::to_string(cell.n_converged) + '\n';
        }
    }
    return out;
}

std::string replicates_to_csv(const McSummary& summary) {
    const std::string model(to_string(summary.config.model));
    std::string out = "model,n,j,seed,converged,loglik_gap";
    for (const auto& name : summary.param_names) out += ',' + name;
    out += '\n';
    for (const auto& r : summary.replicates) {
        out += model + ',' + std::to_string(r.n) + ',' + std::to_string(r.j) + ',' + std::to_string(r.seed) + ',' +
               (r.converged ? "1" : "0") + ',' + format_number(r.loglik_gap);
        for (Eigen::Index i = 0; i < r.theta_hat.size(); ++i) out += ',' + format_number(r.theta_hat[i]);
        out += '\n';
    }
    return out;
}

std::string format_table(const McSummary& summary) {
    char buf[64];
    std::string out = "model " + std::string(to_string(summary.config.model)) + ", m = " +
                      std::to_string(summary.config.m) + "; mean of estimates, MADE in parentheses\n";
    std::snprintf(buf, sizeof(buf), "%-10s %10s", "param", "true");
    out += buf;
    for (const auto& cell : summary.by_n) {
        std::snprintf(buf, sizeof(buf), " %18s", ("n=" + std::to_string(cell.n)).c_str());
        out += buf;
    }
    out += '\n';
    const Eigen::VectorXd truth = natural_vector(summary.config.theta_star);
    for (std::size_t p = 0; p < summary.param_names.size(); ++p) {
        const auto i = static_cast<Eigen::Index>(p);
        std::snprintf(buf, sizeof(buf), "%-10s %10.3f", summary.param_names[p].c_str(), truth[i]);
        out += buf;
        for (const auto& cell : summary.by_n) {
            std::snprintf(buf, sizeof(buf), " %9.3f (%6.3f)", cell.mc_mean[i], cell.made[i]);
            out += buf;
        }
        out += '\n';
    }
    out += "converged ";
    std::snprintf(buf, sizeof(buf), " %10s", "");
    out += buf;
    for (const auto& cell : summary.by_n) {
        std::snprintf(buf, sizeof(buf), " %18s",
                      (std::to_string(cell.n_converged) + "/" + std::to_string(summary.config.m)).c_str());
        out += buf;
    }
    out += '\n';
    return out;
}

}  // namespace odgarch
