#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rissec {

/// Comma-separated table with a header row. Fields are not quoted; every
/// file the tool writes is plain numeric or identifier text.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Throws std::invalid_argument for a missing column.
    std::size_t column(const std::string& name) const;
    bool has_column(const std::string& name) const;
    /// Column parsed as doubles; "nan" and empty fields become NaN.
    std::vector<double> numeric(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Mean of `value` per distinct `key`, skipping non-finite values; keys in
/// ascending order.
Series group_mean(const CsvTable& t, const std::string& key, const std::string& value, std::string label);

/// Trailing moving average over `window` points.
Series moving_average(const Series& s, int window);

struct ChartLabels {
    std::string title;
    std::string x;
    std::string y;
};

std::string line_chart_svg(const ChartLabels& labels, std::span<const Series> series);

/// Row-major grid of values drawn as shaded cells annotated with the value;
/// `highlight` (or -1) gets an outline.
std::string heatmap_svg(const ChartLabels& labels, int rows, int cols, std::span<const double> values,
                        int highlight = -1);

}  // namespace rissec