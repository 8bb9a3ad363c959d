#include "odgarch/boxplot.hpp"

#include "odgarch/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

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

std::string fmt(const char* spec, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

/// Round tick spacing (1, 2 or 5 times a power of ten) giving about `target` ticks.
std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
    const double span = hi - lo;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0}) {
        step = f * mag;
        if (span / step <= target) break;
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
        ticks.push_back(std::fabs(t) < 1e-12 * span ? 0.0 : t);
    }
    return ticks;
}

struct Panel {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};

/// Draws one boxplot panel; `reference` is drawn dashed when `dashed` is set.
void draw_panel(std::string& svg, const Panel& p, const std::string& title, const std::vector<std::string>& labels,
                const std::vector<BoxStats>& boxes, std::optional<double> reference, bool dashed) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& b : boxes) {
        lo = std::min(lo, b.whisker_lo);
        hi = std::max(hi, b.whisker_hi);
        for (double o : b.outliers) {
            lo = std::min(lo, o);
            hi = std::max(hi, o);
        }
    }
    if (reference) {
        lo = std::min(lo, *reference);
        hi = std::max(hi, *reference);
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const double left = p.x + 55.0;
    const double right = p.x + p.w - 10.0;
    const double top = p.y + 25.0;
    const double bottom = p.y + p.h - 30.0;
    auto sy = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - top); };

    svg += "<g>\n";
    svg += "<text x=\"" + fmt("%.1f", (left + right) / 2) + "\" y=\"" + fmt("%.1f", p.y + 16) +
           "\" text-anchor=\"middle\" font-size=\"13\">" + title + "</text>\n";
    svg += "<rect x=\"" + fmt("%.1f", left) + "\" y=\"" + fmt("%.1f", top) + "\" width=\"" +
           fmt("%.1f", right - left) + "\" height=\"" + fmt("%.1f", bottom - top) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : nice_ticks(lo, hi)) {
        const std::string yy = fmt("%.2f", sy(t));
        svg += "<line x1=\"" + fmt("%.1f", left - 4) + "\" y1=\"" + yy + "\" x2=\"" + fmt("%.1f", left) + "\" y2=\"" +
               yy + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + fmt("%.1f", left - 6) + "\" y=\"" + yy +
               "\" text-anchor=\"end\" dominant-baseline=\"middle\" font-size=\"10\">" + fmt("%g", t) + "</text>\n";
    }
    if (reference) {
        const std::string yy = fmt("%.2f", sy(*reference));
        svg += "<line class=\"reference\" x1=\"" + fmt("%.1f", left) + "\" y1=\"" + yy + "\" x2=\"" +
               fmt("%.1f", right) + "\" y2=\"" + yy + "\" stroke=\"red\"" +
               (dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
    }
    const double slot = (right - left) / static_cast<double>(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        const double cx = left + slot * (static_cast<double>(i) + 0.5);
        const double half = std::min(20.0, slot * 0.3);
        const std::string x0 = fmt("%.2f", cx - half);
        const std::string x1 = fmt("%.2f", cx + half);
        const std::string xc = fmt("%.2f", cx);
        svg += "<g class=\"box\">\n";
        svg += "<line x1=\"" + xc + "\" y1=\"" + fmt("%.2f", sy(b.whisker_lo)) + "\" x2=\"" + xc + "\" y2=\"" +
               fmt("%.2f", sy(b.q1)) + "\" stroke=\"black\" stroke-dasharray=\"3,2\"/>\n";
        svg += "<line x1=\"" + xc + "\" y1=\"" + fmt("%.2f", sy(b.q3)) + "\" x2=\"" + xc + "\" y2=\"" +
               fmt("%.2f", sy(b.whisker_hi)) + "\" stroke=\"black\" stroke-dasharray=\"3,2\"/>\n";
        for (double w : {b.whisker_lo, b.whisker_hi}) {
            const std::string yy = fmt("%.2f", sy(w));
            svg += "<line x1=\"" + fmt("%.2f", cx - half / 2) + "\" y1=\"" + yy + "\" x2=\"" +
                   fmt("%.2f", cx + half / 2) + "\" y2=\"" + yy + "\" stroke=\"black\"/>\n";
        }
        svg += "<rect x=\"" + x0 + "\" y=\"" + fmt("%.2f", sy(b.q3)) + "\" width=\"" + fmt("%.2f", 2 * half) +
               "\" height=\"" + fmt("%.2f", sy(b.q1) - sy(b.q3)) + "\" fill=\"white\" stroke=\"black\"/>\n";
        const std::string ym = fmt("%.2f", sy(b.median));
        svg += "<line x1=\"" + x0 + "\" y1=\"" + ym + "\" x2=\"" + x1 + "\" y2=\"" + ym +
               "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        for (double o : b.outliers) {
            svg += "<circle cx=\"" + xc + "\" cy=\"" + fmt("%.2f", sy(o)) +
                   "\" r=\"2\" fill=\"none\" stroke=\"black\"/>\n";
        }
        if (dashed) {
            const double my = sy(b.mean);
            svg += "<path class=\"mean\" d=\"M" + fmt("%.2f", cx - 4) + "," + fmt("%.2f", my - 4) + " L" +
                   fmt("%.2f", cx + 4) + "," + fmt("%.2f", my + 4) + " M" + fmt("%.2f", cx - 4) + "," +
                   fmt("%.2f", my + 4) + " L" + fmt("%.2f", cx + 4) + "," + fmt("%.2f", my - 4) +
                   "\" stroke=\"blue\"/>\n";
        }
        svg += "</g>\n";
        svg += "<text x=\"" + xc + "\" y=\"" + fmt("%.1f", bottom + 16) +
               "\" text-anchor=\"middle\" font-size=\"10\">" + labels[i] + "</text>\n";
    }
    svg += "</g>\n";
}

std::string svg_open(double w, double h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", w) + "\" height=\"" + fmt("%.0f", h) +
           "\" viewBox=\"0 0 " + fmt("%.0f", w) + " " + fmt("%.0f", h) + "\" font-family=\"sans-serif\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::vector<std::string> size_labels(const ReplicateTable& t) {
    std::vector<std::string> out;
    for (auto n : t.sample_sizes) out.push_back("n=" + std::to_string(n));
    return out;
}

}  // namespace

BoxStats box_stats(std::vector<double> values) {
    std::erase_if(values, [](double v) { return std::isnan(v); });
    if (values.empty()) throw std::invalid_argument("box_stats: no finite values");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    // Tukey's five-number summary on 1-based depths.
    const double n4 = std::floor((static_cast<double>(n) + 3.0) / 2.0) / 2.0;
    auto at_depth = [&](double d) {
        const auto lo = static_cast<std::size_t>(std::floor(d)) - 1;
        const auto hi = static_cast<std::size_t>(std::ceil(d)) - 1;
        return 0.5 * (values[lo] + values[hi]);
    };
    BoxStats s;
    s.n = n;
    s.q1 = at_depth(n4);
    s.median = at_depth((static_cast<double>(n) + 1.0) / 2.0);
    s.q3 = at_depth(static_cast<double>(n) + 1.0 - n4);
    const double iqr = s.q3 - s.q1;
    const double fence_lo = s.q1 - 1.5 * iqr;
    const double fence_hi = s.q3 + 1.5 * iqr;
    s.whisker_lo = s.q1;
    s.whisker_hi = s.q3;
    for (double v : values) {
        if (v < fence_lo || v > fence_hi) {
            s.outliers.push_back(v);
        } else {
            s.whisker_lo = std::min(s.whisker_lo, v);
            s.whisker_hi = std::max(s.whisker_hi, v);
        }
    }
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    return s;
}

std::vector<double> ReplicateTable::column(int param, std::size_t sample_size) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] != sample_size) continue;
        out.push_back(param < 0 ? loglik_gap[i] : theta[i][static_cast<std::size_t>(param)]);
    }
    return out;
}

ReplicateTable read_replicates_csv(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("replicates file is empty");
    if (text.back() != '\n') throw std::invalid_argument("replicates file is truncated (no final newline)");
    const auto lines = split(text.substr(0, text.size() - 1), '\n');
    const auto header = split(lines.front(), ',');
    static const std::vector<std::string_view> fixed = {"model", "n", "j", "seed", "converged", "loglik_gap"};
    if (header.size() <= fixed.size()) throw std::invalid_argument("replicates header has no parameter columns");
    for (std::size_t c = 0; c < fixed.size(); ++c) {
        if (header[c] != fixed[c]) {
            throw std::invalid_argument("replicates header is missing column '" + std::string(fixed[c]) + "'");
        }
    }
    ReplicateTable t;
    for (std::size_t c = fixed.size(); c < header.size(); ++c) t.param_names.emplace_back(header[c]);
    if (lines.size() < 2) throw std::invalid_argument("replicates file has no rows");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = split(lines[i], ',');
        if (cols.size() != header.size()) {
            throw std::invalid_argument("replicates row " + std::to_string(i) + " has the wrong number of columns");
        }
        if (t.model.empty()) t.model = std::string(cols[0]);
        if (cols[0] != t.model) throw std::invalid_argument("replicates file mixes models");
        t.n.push_back(static_cast<std::size_t>(parse_number(cols[1])));
        t.converged.push_back(cols[4] == "1");
        t.loglik_gap.push_back(parse_number(cols[5]));
        std::vector<double> row;
        for (std::size_t c = fixed.size(); c < cols.size(); ++c) row.push_back(parse_number(cols[c]));
        t.theta.push_back(std::move(row));
    }
    t.sample_sizes = t.n;
    std::sort(t.sample_sizes.begin(), t.sample_sizes.end());
    t.sample_sizes.erase(std::unique(t.sample_sizes.begin(), t.sample_sizes.end()), t.sample_sizes.end());
    return t;
}

std::string loglik_gap_svg(const ReplicateTable& table) {
    std::vector<BoxStats> boxes;
    for (auto n : table.sample_sizes) boxes.push_back(box_stats(table.column(-1, n)));
    const double w = 120.0 + 90.0 * static_cast<double>(boxes.size());
    std::string svg = svg_open(w, 360.0);
    draw_panel(svg, Panel{0.0, 0.0, w, 360.0}, "log-likelihood gap, model " + table.model, size_labels(table), boxes,
               0.0, false);
    svg += "</svg>\n";
    return svg;
}

std::string estimates_svg(const ReplicateTable& table, const std::optional<std::vector<double>>& truth) {
    if (truth && truth->size() != table.param_names.size()) {
        throw std::invalid_argument("true parameter has the wrong length");
    }
    const std::size_t k = table.param_names.size();
    const std::size_t cols = std::min<std::size_t>(k, 4);
    const std::size_t rows = (k + cols - 1) / cols;
    const double pw = 60.0 + 70.0 * static_cast<double>(table.sample_sizes.size());
    const double ph = 300.0;
    std::string svg = svg_open(pw * static_cast<double>(cols), ph * static_cast<double>(rows));
    for (std::size_t p = 0; p < k; ++p) {
        std::vector<BoxStats> boxes;
        for (auto n : table.sample_sizes) boxes.push_back(box_stats(table.column(static_cast<int>(p), n)));
        const Panel panel{pw * static_cast<double>(p % cols), ph * static_cast<double>(p / cols), pw, ph};
        std::optional<double> ref;
        if (truth) ref = (*truth)[p];
        draw_panel(svg, panel, table.param_names[p], size_labels(table), boxes, ref, true);
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace odgarch
