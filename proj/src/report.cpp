#include "rissec/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "rissec/common.hpp"

namespace rissec {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi - lo < 1e-300) {
            const double pad = std::max(std::abs(lo) * 0.05, 1e-12);
            lo -= pad;
            hi += pad;
        }
    }
};

std::string svg_open(const ChartLabels& labels) {
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{3}</text>\n",
        kWidth, kHeight, kWidth / 2, escape(labels.title));
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument(fmt::format("CSV has no column '{}'", name));
    return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

std::vector<double> CsvTable::numeric(const std::string& name) const {
    const auto c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        const std::string& f = c < r.size() ? r[c] : std::string();
        if (f.empty() || f == "nan") {
            out.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        try {
            out.push_back(std::stod(f));
        } catch (const std::exception&) {
            throw std::invalid_argument(fmt::format("column '{}': '{}' is not a number", name, f));
        }
    }
    return out;
}

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty CSV");
    t.header = split_fields(line);
    while (std::getline(in, line))
        if (!line.empty()) t.rows.push_back(split_fields(line));
    return t;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PrerequisiteError(fmt::format("cannot read '{}'", path));
    return read_csv(in);
}

Series group_mean(const CsvTable& t, const std::string& key, const std::string& value, std::string label) {
    const auto keys = t.numeric(key);
    const auto vals = t.numeric(value);
    std::map<double, std::pair<double, int>> acc;
    for (std::size_t r = 0; r < keys.size(); ++r) {
        if (!std::isfinite(keys[r]) || !std::isfinite(vals[r])) continue;
        auto& [sum, n] = acc[keys[r]];
        sum += vals[r];
        ++n;
    }
    Series s{std::move(label), {}, {}};
    for (const auto& [k, v] : acc) {
        s.x.push_back(k);
        s.y.push_back(v.first / v.second);
    }
    return s;
}

Series moving_average(const Series& s, int window) {
    if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
    Series out{s.label, s.x, std::vector<double>(s.y.size())};
    double sum = 0.0;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        sum += s.y[i];
        if (i >= static_cast<std::size_t>(window)) sum -= s.y[i - window];
        out.y[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, window));
    }
    return out;
}

std::string line_chart_svg(const ChartLabels& labels, std::span<const Series> series) {
    Range xr, yr;
    for (const auto& s : series) {
        for (double v : s.x) xr.add(v);
        for (double v : s.y) yr.add(v);
    }
    xr.settle();
    yr.settle();
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::string svg = svg_open(labels);
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", kLeft,
                       kTop, pw, ph);
    for (int i = 0; i <= 4; ++i) {
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 4, fy = yr.lo + (yr.hi - yr.lo) * i / 4;
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.4g}</text>\n", px(fx),
                           kTop + ph + 16, fx);
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", kLeft - 6,
                           py(fy) + 4, fy);
        svg += fmt::format("<line x1=\"{0:.1f}\" x2=\"{1:.1f}\" y1=\"{2:.1f}\" y2=\"{2:.1f}\" stroke=\"#ddd\"/>\n", kLeft,
                           kLeft + pw, py(fy));
    }
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
                       kHeight - 12, escape(labels.x));
    svg += fmt::format(
        "<text x=\"16\" y=\"{0:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.1f})\">{1}</text>\n",
        kTop + ph / 2, escape(labels.y));

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = kPalette[i % std::size(kPalette)];
        std::string pts;
        for (std::size_t j = 0; j < std::min(s.x.size(), s.y.size()); ++j) {
            if (!std::isfinite(s.x[j]) || !std::isfinite(s.y[j])) continue;
            pts += fmt::format("{:.2f},{:.2f} ", px(s.x[j]), py(s.y[j]));
        }
        svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
        const double ly = kTop + 10 + 18 * static_cast<double>(i);
        svg += fmt::format("<line x1=\"{0}\" x2=\"{1}\" y1=\"{2}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                           kWidth - kRight + 10, kWidth - kRight + 30, ly, color);
        svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kWidth - kRight + 35, ly + 4, escape(s.label));
    }
    svg += "</svg>\n";
    return svg;
}

std::string heatmap_svg(const ChartLabels& labels, int rows, int cols, std::span<const double> values,
                        int highlight) {
    if (rows < 1 || cols < 1 || values.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("heatmap_svg: value count does not match the grid");
    Range vr;
    for (double v : values) vr.add(v);
    vr.settle();
    const double side = std::min(kWidth - kLeft - kRight, kHeight - kTop - kBottom);
    const double cw = side / cols, ch = side / rows;

    std::string svg = svg_open(labels);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int idx = r * cols + c;
            const double v = values[idx];
            const double t = std::isfinite(v) ? (v - vr.lo) / (vr.hi - vr.lo) : 0.0;
            const int shade = static_cast<int>(std::lround(255 - 200 * t));
            // row 0 is drawn at the bottom so the picture matches the x-y plane
            const double x = kLeft + c * cw, y = kTop + (rows - 1 - r) * ch;
            svg += fmt::format(
                "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"rgb({},{},255)\" "
                "stroke=\"{}\" stroke-width=\"{}\"/>\n",
                x, y, cw, ch, shade, shade, idx == highlight ? "#d62728" : "#888", idx == highlight ? 3 : 1);
            svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-size=\"10\">{}: {:.3g}</text>\n",
                               x + cw / 2, y + ch / 2 + 4, idx, v);
        }
    }
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", kLeft + side / 2,
                       kTop + side + 20, escape(labels.x));
    svg += fmt::format(
        "<text x=\"16\" y=\"{0:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.1f})\">{1}</text>\n",
        kTop + side / 2, escape(labels.y));
    svg += "</svg>\n";
    return svg;
}

}  // namespace rissec