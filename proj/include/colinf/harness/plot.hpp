#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "colinf/harness/csv.hpp"

namespace colinf {

/// split: accuracy vs split point. per: accuracy vs data PER, one series per
/// query PER. rho: connections vs rho and accuracy vs rho (two charts).
enum class PlotKind { split, per, rho };

PlotKind parse_plot_kind(std::string_view text);
const char* to_string(PlotKind kind);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Self-contained SVG line chart. Distinct x values are evenly spaced.
std::string render_svg(const Chart& chart);

/// Builds the charts of `kind` from result rows, averaging over seeds. Failed
/// rows are skipped.
std::vector<Chart> build_charts(const std::vector<ResultRow>& rows, PlotKind kind);

/// Reads `csv`, writes `<stem>_<kind>_<metric>.svg` files into `out_dir` and
/// returns their paths. Nothing is written when the CSV has no usable rows.
std::vector<std::filesystem::path> emit_plot(const std::filesystem::path& csv, PlotKind kind,
                                             const std::filesystem::path& out_dir);

}  // namespace colinf
