#include "odgarch/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <vector>

namespace odgarch {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* name) {
    if (!j.is_array()) throw std::invalid_argument(std::string(name) + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

double require_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw std::invalid_argument(std::string("missing numeric field '") + key + "'");
    }
    return j.at(key).get<double>();
}

}  // namespace

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_number(std::string_view token) {
    double v = 0.0;
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size() || token.empty()) {
        throw std::invalid_argument("not a number: '" + std::string(token) + "'");
    }
    return v;
}

nlohmann::json params_to_json(const ModelParams& params) {
    nlohmann::json j;
    if (const auto* p = std::get_if<NbinParams>(&params)) {
        j = {{"omega", p->omega}, {"a", p->a}, {"b", p->b}, {"r", p->r}};
    } else if (const auto* t = std::get_if<TingParams>(&params)) {
        j = {{"omega", t->omega}, {"a", t->a}, {"b", t->b}, {"tau", t->tau}};
    } else {
        const auto& m = std::get<NmParams>(params);
        nlohmann::json rows = nlohmann::json::array();
        for (int r = 0; r < m.dim(); ++r) rows.push_back(vector_to_json(m.A.row(r).transpose()));
        j = {{"d", m.dim()},
             {"gamma", vector_to_json(m.gamma)},
             {"omega", vector_to_json(m.omega)},
             {"A", rows},
             {"b", vector_to_json(m.b)}};
    }
    return j;
}

ModelParams params_from_json(ModelKind kind, const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("parameters must be a JSON object");
    ModelParams out;
    if (kind == ModelKind::nbin) {
        out = NbinParams{require_field(j, "omega"), require_field(j, "a"), require_field(j, "b"), require_field(j, "r")};
    } else if (kind == ModelKind::ting) {
        out = TingParams{require_field(j, "omega"), require_field(j, "a"), require_field(j, "b"),
                         require_field(j, "tau")};
    } else {
        NmParams m;
        if (!j.contains("gamma") || !j.contains("omega") || !j.contains("A") || !j.contains("b")) {
            throw std::invalid_argument("NM parameters need gamma, omega, A and b");
        }
        m.gamma = vector_from_json(j.at("gamma"), "gamma");
        m.omega = vector_from_json(j.at("omega"), "omega");
        m.b = vector_from_json(j.at("b"), "b");
        const auto& rows = j.at("A");
        if (!rows.is_array()) throw std::invalid_argument("A must be an array of rows");
        const auto d = static_cast<Eigen::Index>(rows.size());
        m.A.resize(d, d);
        for (Eigen::Index r = 0; r < d; ++r) {
            const Eigen::VectorXd row = vector_from_json(rows[static_cast<std::size_t>(r)], "A row");
            if (row.size() != d) throw std::invalid_argument("A must be square");
            m.A.row(r) = row.transpose();
        }
        if (j.contains("d") && j.at("d").get<int>() != m.dim()) {
            throw std::invalid_argument("NM field d disagrees with vector lengths");
        }
        out = std::move(m);
    }
    validate(out);
    return out;
}

nlohmann::json state_to_json(const State& x) {
    if (x.size() == 1) return x[0];
    return vector_to_json(x);
}

State state_from_json(const nlohmann::json& j) {
    if (j.is_number()) return scalar_state(j.get<double>());
    return vector_from_json(j, "state");
}

std::string series_to_csv(const Series& series) {
    std::string out = "k,y";
    const Eigen::Index d = series.x_trace ? series.x_trace->cols() : 0;
    for (Eigen::Index c = 1; c <= d; ++c) out += ",x_" + std::to_string(c);
    out += '\n';
    for (std::size_t k = 0; k < series.y.size(); ++k) {
        out += std::to_string(k + 1);
        out += ',';
        out += format_number(series.y[k]);
        for (Eigen::Index c = 0; c < d; ++c) {
            out += ',';
            out += format_number((*series.x_trace)(static_cast<Eigen::Index>(k), c));
        }
        out += '\n';
    }
    return out;
}

Series series_from_csv(std::string_view text, ModelKind kind) {
    if (text.empty()) throw std::invalid_argument("series file is empty");
    if (text.back() != '\n') throw std::invalid_argument("series file is truncated (no final newline)");
    std::vector<std::string_view> lines = split(text.substr(0, text.size() - 1), '\n');
    for (auto& line : lines) {
        if (!line.empty() && line.back() == '\r') throw std::invalid_argument("CRLF line endings are not accepted");
    }
    const auto header = split(lines.front(), ',');
    if (header.size() < 2 || header[0] != "k" || header[1] != "y") {
        throw std::invalid_argument("series header must start with 'k,y'");
    }
    const std::size_t d = header.size() - 2;
    for (std::size_t c = 0; c < d; ++c) {
        if (header[2 + c] != "x_" + std::to_string(c + 1)) {
            throw std::invalid_argument("unexpected header column '" + std::string(header[2 + c]) + "'");
        }
    }
    Series s;
    s.model = kind;
    const std::size_t n = lines.size() - 1;
    if (n == 0) throw std::invalid_argument("series file has no observations");
    s.y.resize(n);
    Eigen::MatrixXd trace;
    if (d > 0) trace.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        const auto cols = split(lines[i + 1], ',');
        if (cols.size() != header.size()) {
            throw std::invalid_argument("row " + std::to_string(i + 1) + " has " + std::to_string(cols.size()) +
                                        " columns, expected " + std::to_string(header.size()));
        }
        if (parse_number(cols[0]) != static_cast<double>(i + 1)) {
            throw std::invalid_argument("row " + std::to_string(i + 1) + ": k is not consecutive");
        }
        s.y[i] = parse_number(cols[1]);
        for (std::size_t c = 0; c < d; ++c) {
            trace(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = parse_number(cols[2 + c]);
        }
    }
    if (d > 0) s.x_trace = std::move(trace);
    s.validate();
    return s;
}

nlohmann::json series_metadata(const Series& series) {
    nlohmann::json j;
    j["model"] = std::string(to_string(series.model));
    j["params"] = series.params ? params_to_json(*series.params) : nlohmann::json(nullptr);
    j["seed"] = series.seed;
    j["n"] = series.n();
    j["burn_in"] = series.burn_in;
    j["stable"] = series.stable;
    return j;
}

std::string trace_to_csv(const Series& series, const FilterTrace& trace) {
    if (static_cast<std::size_t>(trace.u.rows()) != series.n()) {
        throw std::invalid_argument("trace length differs from series length");
    }
    std::istringstream base(series_to_csv(series));
    std::string out;
    std::string line;
    std::getline(base, line);
    out += line;
    const Eigen::Index d = trace.u.cols();
    if (d == 1) {
        out += ",u";
    } else {
        for (Eigen::Index c = 1; c <= d; ++c) out += ",u_" + std::to_string(c);
    }
    if (trace.du) out += ",du_w,du_a,du_b";
    out += '\n';
    for (Eigen::Index k = 0; k < trace.u.rows(); ++k) {
        std::getline(base, line);
        out += line;
        for (Eigen::Index c = 0; c < d; ++c) out += ',' + format_number(trace.u(k, c));
        if (trace.du) {
            for (Eigen::Index c = 0; c < 3; ++c) out += ',' + format_number((*trace.du)(k, c));
        }
        out += '\n';
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace odgarch
