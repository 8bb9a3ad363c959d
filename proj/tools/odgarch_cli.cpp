#include "odgarch/boxplot.hpp"
#include "odgarch/estimation.hpp"
#include "odgarch/feasible_map.hpp"
#include "odgarch/io.hpp"
#include "odgarch/likelihood.hpp"
#include "odgarch/montecarlo.hpp"
#include "odgarch/verifier.hpp"

#ifdef ODGARCH_CLI11_PACKAGE
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace odgarch;

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kUsage = 2, kVerifyFailed = 3 };

/// Bad or missing flags, reported with exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParamFlags {
    std::string model = "nbin";
    std::optional<std::string> omega;
    std::optional<double> a;
    std::optional<double> b;
    std::optional<double> r;
    std::optional<double> tau;
    std::optional<std::string> gamma;
    std::optional<std::string> A;
    std::optional<std::string> bvec;

    void add_to(CLI::App& app) {
        app.add_option("--model", model, "nbin | nm | ting")->check(CLI::IsMember({"nbin", "nm", "ting"}));
        app.add_option("--omega", omega, "omega (NM: comma-separated vector)");
        app.add_option("--a", a);
        app.add_option("--b", b);
        app.add_option("--r", r, "NB shape (nbin)");
        app.add_option("--tau", tau, "threshold (ting)");
        app.add_option("--gamma", gamma, "mixture weights, e.g. \".5,.5\" (nm)");
        app.add_option("--A", A, "matrix, rows separated by ';', e.g. \".5,.1;.0,.4\" (nm)");
        app.add_option("--bvec", bvec, "vector b (nm)");
    }
};

Eigen::VectorXd parse_vector(const std::string& text, const char* flag) {
    std::vector<double> v;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = text.find(',', start);
        const std::string tok = text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        try {
            v.push_back(parse_number(tok));
        } catch (const std::invalid_argument&) {
            throw UsageError(std::string(flag) + ": cannot parse '" + text + "'");
        }
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd parse_matrix(const std::string& text, const char* flag) {
    std::vector<Eigen::VectorXd> rows;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = text.find(';', start);
        rows.push_back(parse_vector(text.substr(start, pos == std::string::npos ? std::string::npos : pos - start), flag));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) throw UsageError(std::string(flag) + ": rows have different lengths");
        m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    }
    return m;
}

template <typename T>
T require(const std::optional<T>& v, const char* flag, const std::string& model) {
    if (!v) throw UsageError(std::string(flag) + " is required for --model " + model);
    return *v;
}

ModelParams params_from_flags(const ParamFlags& f) {
    ModelParams p;
    if (f.model == "nbin") {
        p = NbinParams{parse_vector(require(f.omega, "--omega", f.model), "--omega")[0], require(f.a, "--a", f.model),
                       require(f.b, "--b", f.model), require(f.r, "--r", f.model)};
    } else if (f.model == "ting") {
        p = TingParams{parse_vector(require(f.omega, "--omega", f.model), "--omega")[0], require(f.a, "--a", f.model),
                       require(f.b, "--b", f.model), require(f.tau, "--tau", f.model)};
    } else {
        NmParams m;
        m.gamma = parse_vector(require(f.gamma, "--gamma", f.model), "--gamma");
        m.omega = parse_vector(require(f.omega, "--omega", f.model), "--omega");
        m.A = parse_matrix(require(f.A, "--A", f.model), "--A");
        m.b = parse_vector(require(f.bvec, "--bvec", f.model), "--bvec");
        p = std::move(m);
    }
    try {
        validate(p);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return p;
}

std::optional<State> parse_x1(const std::optional<std::string>& text) {
    if (!text) return std::nullopt;
    State x = parse_vector(*text, "--x1");
    if (!(x.array() > 0.0).all()) throw UsageError("--x1 must be positive");
    return x;
}

fs::path sidecar_path(const fs::path& csv) {
    fs::path p = csv;
    p.replace_extension(".json");
    return p;
}

std::string describe(const ModelParams& p) {
    std::string out;
    const auto names = natural_names(p);
    const Eigen::VectorXd v = natural_vector(p);
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += ' ';
        out += names[i] + '=' + format_number(v[static_cast<Eigen::Index>(i)]);
    }
    return out;
}

struct FitFlags {
    double tol = 1e-6;
    int max_outer = 20;
    int max_inner = 500;
    double margin = 1e-4;
    int nm_dim = 2;

    void add_to(CLI::App& app) {
        app.add_option("--tol", tol, "KKT tolerance")->check(CLI::PositiveNumber);
        app.add_option("--max-outer", max_outer, "augmented Lagrangian rounds")->check(CLI::PositiveNumber);
        app.add_option("--max-inner", max_inner, "BFGS iterations per round")->check(CLI::PositiveNumber);
        app.add_option("--margin", margin, "distance kept from the stability boundary")->check(CLI::Range(0.0, 0.5));
        app.add_option("--nm-dim", nm_dim, "mixture size for NM fits")->check(CLI::Range(1, 16));
    }

    [[nodiscard]] FitOptions options() const {
        FitOptions o;
        o.tol = tol;
        o.max_outer = max_outer;
        o.max_inner = max_inner;
        o.margin = margin;
        o.nm_dim = nm_dim;
        return o;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation, estimation and verification for observation-driven GARCH models"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a series");
    ParamFlags sim_params;
    sim_params.add_to(*sim);
    std::size_t sim_n = 0;
    std::uint64_t sim_seed = 0;
    std::optional<std::string> sim_x1;
    int sim_burn = 500;
    std::string sim_out;
    sim->add_option("--n", sim_n, "number of observations")->required()->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_seed)->required();
    sim->add_option("--x1", sim_x1, "initial state before burn-in");
    sim->add_option("--burn-in", sim_burn)->check(CLI::NonNegativeNumber);
    sim->add_option("--out", sim_out, "series CSV; metadata goes to the same stem with .json")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "conditional maximum likelihood");
    std::string fit_model = "nbin";
    std::string fit_in;
    std::string fit_out;
    std::optional<std::string> fit_x1;
    std::optional<std::string> fit_trace;
    FitFlags fit_flags;
    fit->add_option("--model", fit_model)->check(CLI::IsMember({"nbin", "nm", "ting"}));
    fit->add_option("--in", fit_in, "series CSV")->required();
    fit->add_option("--out", fit_out, "result JSON")->required();
    fit->add_option("--x1", fit_x1, "anchor state (default: fixed point of the initializer)");
    fit->add_option("--trace", fit_trace, "write the filter trace at the estimate to this CSV");
    fit_flags.add_to(*fit);

    // mc
    auto* mc = app.add_subcommand("mc", "Monte Carlo study");
    std::string mc_config;
    std::string mc_out;
    unsigned mc_threads = 0;
    bool mc_drop = false;
    bool mc_quiet = false;
    mc->add_option("--config", mc_config, "experiment JSON")->required();
    mc->add_option("--out", mc_out, "output directory")->required();
    mc->add_option("--threads", mc_threads, "worker threads (0: all cores)");
    mc->add_flag("--drop-nonconverged", mc_drop, "exclude non-converged fits from the aggregates");
    mc->add_flag("--quiet", mc_quiet, "no progress on stderr");

    // verify
    auto* ver = app.add_subcommand("verify", "numerical check of the model assumptions");
    ParamFlags ver_params;
    ver_params.add_to(*ver);
    std::string ver_out;
    GridSpec grid;
    ver->add_option("--out", ver_out, "report JSON");
    ver->add_option("--n-triples", grid.n_triples)->check(CLI::PositiveNumber);
    ver->add_option("--seed", grid.seed);

    // plot
    auto* plot = app.add_subcommand("plot", "boxplot figures from replicates.csv");
    std::string plot_in;
    std::optional<std::string> plot_config;
    std::string plot_out;
    plot->add_option("--replicates", plot_in)->required();
    plot->add_option("--config", plot_config, "experiment JSON for the true values (default: config.json beside the input)");
    plot->add_option("--out", plot_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*sim) {
            const ModelParams p = params_from_flags(sim_params);
            SimulateOptions opts;
            opts.x0 = parse_x1(sim_x1);
            opts.burn_in = sim_burn;
            if (opts.x0 && opts.x0->size() != state_dim(p)) throw UsageError("--x1 has the wrong dimension");
            if (!stability_check(p).stable) {
                std::cerr << "warning: parameters are outside the stability region; the series is not stationary\n";
            }
            const Series s = simulate(p, sim_n, sim_seed, opts);
            write_text_file_atomic(sim_out, series_to_csv(s));
            write_text_file_atomic(sidecar_path(sim_out), series_metadata(s).dump(2) + "\n");
            return kOk;
        }

        if (*fit) {
            const ModelKind kind = parse_model_kind(fit_model);
            Series s = series_from_csv(read_text_file(fit_in), kind);
            const fs::path meta = sidecar_path(fit_in);
            if (fs::exists(meta)) {
                const auto j = nlohmann::json::parse(read_text_file(meta));
                if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
            }
            const auto x1 = parse_x1(fit_x1);
            const FitResult r = mle_fit(s, kind, x1, fit_flags.options());
            write_text_file_atomic(fit_out, to_json(r).dump(2) + "\n");
            if (fit_trace) write_text_file_atomic(*fit_trace, trace_to_csv(s, filter(r.theta_hat, r.x1_used, s.y)));
            std::cout << "theta_hat: " << describe(r.theta_hat) << "\n"
                      << "loglik: " << format_number(r.loglik_hat) << "\n"
                      << "converged: " << (r.converged ? "true" : "false") << "\n";
            return kOk;
        }

        if (*mc) {
            ExperimentConfig config = config_from_json(nlohmann::json::parse(read_text_file(mc_config)));
            if (mc_drop) config.drop_nonconverged = true;
            ProgressFn progress;
            if (!mc_quiet) {
                progress = [](std::size_t done, std::size_t total) {
                    if (done % 50 == 0 || done == total) std::cerr << "\r" << done << "/" << total << std::flush;
                    if (done == total) std::cerr << "\n";
                };
            }
            const McSummary summary = run_experiment(config, mc_threads, progress);
            fs::create_directories(mc_out);
            write_text_file_atomic(fs::path(mc_out) / "summary.csv", summary_to_csv(summary));
            write_text_file_atomic(fs::path(mc_out) / "replicates.csv", replicates_to_csv(summary));
            write_text_file_atomic(fs::path(mc_out) / "config.json", to_json(config).dump(2) + "\n");
            std::cout << format_table(summary);
            return kOk;
        }

        if (*ver) {
            const ModelParams p = params_from_flags(ver_params);
            const VerifierReport report = verify_all(p, grid);
            const std::string text = to_json(report).dump(2) + "\n";
            if (ver_out.empty()) {
                std::cout << text;
            } else {
                write_text_file_atomic(ver_out, text);
                for (const auto& c : report.checks) {
                    std::cout << c.name << ": "
                              << (c.skipped ? "skipped" : (c.passed ? "pass" : "FAIL")) << " (" << c.n_violations
                              << "/" << c.n_samples << " violations)";
                    if (!c.reason.empty()) std::cout << " " << c.reason;
                    std::cout << "\n";
                }
            }
            return report.passed() ? kOk : kVerifyFailed;
        }

        if (*plot) {
            const ReplicateTable table = read_replicates_csv(read_text_file(plot_in));
            fs::path config_path = plot_config ? fs::path(*plot_config) : fs::path(plot_in).parent_path() / "config.json";
            std::optional<std::vector<double>> truth;
            if (fs::exists(config_path)) {
                const ExperimentConfig c = config_from_json(nlohmann::json::parse(read_text_file(config_path)));
                const Eigen::VectorXd v = natural_vector(c.theta_star);
                truth = std::vector<double>(v.data(), v.data() + v.size());
            } else if (plot_config) {
                throw std::runtime_error("cannot open '" + config_path.string() + "'");
            } else {
                std::cerr << "warning: no config.json found; true-value lines omitted\n";
            }
            fs::create_directories(plot_out);
            write_text_file_atomic(fs::path(plot_out) / "loglik_gap.svg", loglik_gap_svg(table));
            write_text_file_atomic(fs::path(plot_out) / "estimates.svg", estimates_svg(table, truth));
            return kOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}
