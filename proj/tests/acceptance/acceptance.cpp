// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include "odgarch/likelihood.hpp"
#include "odgarch/model.hpp"
#include "odgarch/rng.hpp"
#include "odgarch/special_functions.hpp"
#include "odgarch/verifier.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace odgarch;

namespace {

int g_failures = 0;

void report(int id, bool ok, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cols.push_back(cell);
        rows.push_back(cols);
    }
    return rows;
}

int run_cli(const std::string& args) {
    const std::string cmd = "'" ODGARCH_CLI_PATH "' " + args;
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

/// summary.csv as (n, param) -> (mean, made).
struct Summary {
    std::map<std::pair<int, std::string>, std::pair<double, double>> cells;
    std::vector<int> ns;
    std::vector<std::string> params;
};

Summary load_summary(const fs::path& p) {
    Summary s;
    const auto rows = read_csv(p);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const int n = std::stoi(rows[i][1]);
        s.cells[{n, rows[i][2]}] = {std::stod(rows[i][3]), std::stod(rows[i][4])};
        if (std::find(s.ns.begin(), s.ns.end(), n) == s.ns.end()) s.ns.push_back(n);
        if (std::find(s.params.begin(), s.params.end(), rows[i][2]) == s.params.end()) s.params.push_back(rows[i][2]);
    }
    std::sort(s.ns.begin(), s.ns.end());
    return s;
}

/// Median loglik gap per n from replicates.csv.
std::map<int, double> median_gaps(const fs::path& p) {
    std::map<int, std::vector<double>> by_n;
    const auto rows = read_csv(p);
    for (std::size_t i = 1; i < rows.size(); ++i) by_n[std::stoi(rows[i][1])].push_back(std::stod(rows[i][5]));
    std::map<int, double> out;
    for (auto& [n, v] : by_n) {
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size();
        out[n] = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    }
    return out;
}

long double digamma_series(long double x) {
    constexpr long double euler = 0.577215664901532860606512090082402431L;
    constexpr int K = 20000;
    long double s = 0.0L;
    for (int k = K - 1; k >= 0; --k) s += 1.0L / (k + 1) - 1.0L / (k + x);
    const long double a = K + 1.0L;
    const long double b = K + x;
    const long double f = 1.0L / a - 1.0L / b;
    const long double f1 = -1.0L / (a * a) + 1.0L / (b * b);
    const long double f3 = -6.0L / (a * a * a * a) + 6.0L / (b * b * b * b);
    return -euler + s + std::log(b / a) + f / 2.0L - f1 / 12.0L + f3 / 720.0L;
}

long double oracle_loglik(const long double th[4], long double x1, const std::vector<double>& y) {
    long double u = x1;
    long double s = 0.0L;
    for (double yk : y) {
        s += std::lgamma(yk + th[3]) - std::lgamma(yk + 1.0L) - std::lgamma(th[3]) + yk * std::log(u / (1.0L + u)) -
             th[3] * std::log1p(u);
        u = th[0] + th[1] * u + th[2] * yk;
    }
    return s / static_cast<long double>(y.size());
}

Eigen::Vector4d central_difference_gradient(const NbinParams& p, double x1, const std::vector<double>& y) {
    const long double th[4] = {p.omega, p.a, p.b, p.r};
    Eigen::Vector4d g;
    for (int i = 0; i < 4; ++i) {
        auto diff = [&](long double h) {
            long double up[4] = {th[0], th[1], th[2], th[3]};
            long double dn[4] = {th[0], th[1], th[2], th[3]};
            up[i] += h;
            dn[i] -= h;
            return (oracle_loglik(up, x1, y) - oracle_loglik(dn, x1, y)) / (2.0L * h);
        };
        const long double h = 1e-3L * th[i];
        g[i] = static_cast<double>((4.0L * diff(h / 2.0L) - diff(h)) / 3.0L);
    }
    return g;
}

struct McRun {
    bool ok = false;
    fs::path dir;
    double seconds = 0.0;
};

McRun run_mc(const std::string& tag, const std::string& theta, const std::string& extra) {
    McRun r;
    r.dir = fs::current_path() / ("acceptance_" + tag);
    fs::remove_all(r.dir);
    fs::create_directories(r.dir);
    const fs::path cfg = r.dir / "config_in.json";
    std::ofstream(cfg) << R"({"model":"nbin","theta_star":)" << theta
                       << R"(,"sample_sizes":[128,256,512,1024],"m":200,"base_seed":2019})";
    const auto t0 = std::chrono::steady_clock::now();
    r.ok = run_cli("mc --config '" + cfg.string() + "' --out '" + r.dir.string() + "' --quiet " + extra + " > '" +
                   (r.dir / "table.txt").string() + "'") == 0;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

bool made_trend_ok(const Summary& s, std::string& detail) {
    bool ok = true;
    for (const auto& param : s.params) {
        int inversions = 0;
        for (std::size_t i = 0; i + 1 < s.ns.size(); ++i) {
            const double cur = s.cells.at({s.ns[i], param}).second;
            const double next = s.cells.at({s.ns[i + 1], param}).second;
            if (next > cur) {
                ++inversions;
                if ((next - cur) / cur > 0.10) ok = false;
            }
        }
        if (inversions > 1) ok = false;
        detail += " " + param + ":";
        for (int n : s.ns) detail += fmt(s.cells.at({n, param}).second, 3) + (n == s.ns.back() ? "" : ">");
    }
    return ok;
}

}  // namespace

int main() {
    const std::string m1_theta = R"({"omega":3,"a":0.2,"b":0.2,"r":2})";
    const std::string m2_theta = R"({"omega":3,"a":0.35,"b":0.1,"r":1.5})";

    // 1. Table 1, (M.1).
    const McRun m1 = run_mc("m1", m1_theta, "--threads 0");
    Summary s1;
    {
        bool ok = m1.ok;
        std::string detail;
        if (ok) {
            s1 = load_summary(m1.dir / "summary.csv");
            const std::map<std::string, std::pair<double, double>> target = {
                {"omega", {3.062, 0.12}}, {"a", {0.193, 0.03}}, {"b", {0.200, 0.01}}, {"r", {2.011, 0.03}}};
            for (const auto& [param, tt] : target) {
                const double mean = s1.cells.at({1024, param}).first;
                ok = ok && std::fabs(mean - tt.first) <= tt.second;
                detail += param + "=" + fmt(mean, 3) + " (paper " + fmt(tt.first, 3) + " +- " + fmt(tt.second, 2) + ") ";
            }
            detail += "runtime " + fmt(m1.seconds, 1) + "s";
        } else {
            detail = "mc run failed";
        }
        report(1, ok, detail);
    }

    // 2. Table 1, (M.2).
    const McRun m2 = run_mc("m2", m2_theta, "--threads 0");
    Summary s2;
    {
        bool ok = m2.ok;
        std::string detail;
        if (ok) {
            s2 = load_summary(m2.dir / "summary.csv");
            const std::map<std::string, std::pair<double, double>> target = {{"r", {1.513, 0.03}}, {"b", {0.100, 0.01}}};
            for (const auto& [param, tt] : target) {
                const double mean = s2.cells.at({1024, param}).first;
                ok = ok && std::fabs(mean - tt.first) <= tt.second;
                detail += param + "=" + fmt(mean, 3) + " (paper " + fmt(tt.first, 3) + " +- " + fmt(tt.second, 2) + ") ";
            }
            detail += "runtime " + fmt(m2.seconds, 1) + "s";
        } else {
            detail = "mc run failed";
        }
        report(2, ok, detail);
    }

    // 3. MADE trend.
    {
        std::string d1;
        std::string d2;
        const bool ok = m1.ok && m2.ok && made_trend_ok(s1, d1) & made_trend_ok(s2, d2);
        report(3, ok, "M1" + d1 + " | M2" + d2);
    }

    // 4. Figure 1 shape.
    {
        bool ok = m1.ok && m2.ok;
        std::string detail;
        for (const auto& [tag, run] : {std::pair{"M1", &m1}, std::pair{"M2", &m2}}) {
            if (!run->ok) continue;
            const auto med = median_gaps(run->dir / "replicates.csv");
            double prev = std::numeric_limits<double>::infinity();
            detail += std::string(tag) + " medians:";
            for (const auto& [n, v] : med) {
                ok = ok && v > 0.0 && v < prev;
                prev = v;
                detail += " " + fmt(v, 5);
            }
            const double ratio = med.begin()->second / med.rbegin()->second;
            ok = ok && ratio >= 4.0;
            detail += " (ratio " + fmt(ratio, 2) + ") ";
        }
        report(4, ok, detail);
    }

    // 5. Gradient suite.
    {
        Rng rng(555);
        double worst = 0.0;
        for (int t = 0; t < 500; ++t) {
            const auto p = std::get<NbinParams>(random_stable_params(ModelKind::nbin, rng));
            const auto y = simulate(p, 64, 10000 + static_cast<std::uint64_t>(t)).y;
            const double x1 = p.omega * (1.0 + 10.0 * rng.uniform());
            const Eigen::Vector4d g = grad_loglik_nbin(p, x1, y);
            const Eigen::Vector4d fd = central_difference_gradient(p, x1, y);
            worst = std::max(worst, (g - fd).lpNorm<Eigen::Infinity>() / std::max(fd.lpNorm<Eigen::Infinity>(), 1e-8));
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2e", worst);
        report(5, worst < 1e-5, "500 instances, n=64, max relative error " + std::string(buf) + " (< 1e-5)");
    }

    // 6. Verifier suite.
    {
        const auto t0 = std::chrono::steady_clock::now();
        NmParams nm;
        nm.gamma = Eigen::Vector2d(0.3, 0.7);
        nm.omega = Eigen::Vector2d(0.5, 1.0);
        nm.A.resize(2, 2);
        nm.A << 0.5, 0.1, 0.0, 0.4;
        nm.b = Eigen::Vector2d(0.1, 0.2);
        std::vector<ModelParams> sets = {NbinParams{3, 0.2, 0.2, 2}, NbinParams{3, 0.35, 0.1, 1.5},
                                         TingParams{3, 0.35, 0.1, 4}, nm};
        Rng rng(666);
        for (ModelKind kind : {ModelKind::nbin, ModelKind::nm, ModelKind::ting}) {
            for (int i = 0; i < 20; ++i) sets.push_back(random_stable_params(kind, rng));
        }
        GridSpec grid;
        grid.n_triples = 10000;
        std::size_t violations = 0;
        std::size_t failed_sets = 0;
        std::size_t samples = 0;
        for (const auto& p : sets) {
            const VerifierReport r = verify_all(p, grid);
            violations += r.total_violations();
            failed_sets += r.passed() ? 0 : 1;
            for (const auto& c : r.checks) samples += c.n_samples;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report(6, violations == 0 && failed_sets == 0 && secs <= 120.0,
               std::to_string(sets.size()) + " parameter sets, " + std::to_string(samples) + " samples, " +
                   std::to_string(violations) + " violations, " + fmt(secs, 1) + "s");
    }

    // 7. Exactness oracles.
    {
        double dg = 0.0;
        for (int i = 1; i <= 1000; ++i) {
            const double x = 50.0 * i / 1000.0;
            const long double ref = digamma_series(x);
            dg = std::max(dg, static_cast<double>(std::fabs((digamma(x) - ref) / ref)));
        }
        Rng rng(777);
        double cf = 0.0;
        double ci = 0.0;
        for (int t = 0; t < 500; ++t) {
            const auto p = std::get<NbinParams>(random_stable_params(ModelKind::nbin, rng));
            const std::size_t n = 1 + static_cast<std::size_t>(t % 64);
            const auto y = simulate(p, n, 20000 + static_cast<std::uint64_t>(t)).y;
            const double x1 = p.omega * (1.0 + 10.0 * rng.uniform());
            const double x = p.omega * (1.0 + 10.0 * rng.uniform());
            long double ref = std::pow(static_cast<long double>(p.a), n) * x1;
            for (std::size_t k = 0; k < n; ++k) ref += p.omega * std::pow(static_cast<long double>(p.a), k);
            for (std::size_t k = 1; k <= n; ++k) ref += p.b * std::pow(static_cast<long double>(p.a), n - k) * y[k - 1];
            const double fx1 = iterate_f(p, scalar_state(x1), y)[0];
            const double fx = iterate_f(p, scalar_state(x), y)[0];
            cf = std::max(cf, static_cast<double>(std::fabs((fx1 - ref) / ref)));
            ci = std::max(ci, std::fabs(std::fabs(fx1 - fx) - std::pow(p.a, static_cast<double>(n)) * std::fabs(x1 - x)));
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "digamma rel %.1e (< 1e-10), closed form rel %.1e (< 1e-10), contraction abs %.1e (< 1e-12)",
                      dg, cf, ci);
        report(7, dg < 1e-10 && cf < 1e-10 && ci < 1e-12, buf);
    }

    // 8. Determinism across thread counts.
    {
        bool ok = m1.ok && m2.ok;
        std::string detail;
        for (const auto& [tag, theta, base] :
             {std::tuple{"m1", m1_theta, &m1}, std::tuple{"m2", m2_theta, &m2}}) {
            for (const char* threads : {"1", "3"}) {
                const McRun again = run_mc(std::string(tag) + "_t" + threads, theta, std::string("--threads ") + threads);
                const bool same = again.ok &&
                                  slurp(again.dir / "summary.csv") == slurp(base->dir / "summary.csv") &&
                                  slurp(again.dir / "replicates.csv") == slurp(base->dir / "replicates.csv");
                ok = ok && same;
                detail += std::string(tag) + " threads=" + threads + (same ? " identical; " : " DIFFERENT; ");
            }
        }
        report(8, ok, detail);
    }

    std::printf("%d of 8 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
