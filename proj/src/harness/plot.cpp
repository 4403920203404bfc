#include "colinf/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "colinf/error.hpp"

namespace colinf {

PlotKind parse_plot_kind(std::string_view text) {
  if (text == "split") return PlotKind::split;
  if (text == "per") return PlotKind::per;
  if (text == "rho") return PlotKind::rho;
  throw ConfigError("unknown plot kind '" + std::string(text) + "' (expected split, per or rho)");
}

const char* to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::split: return "split";
    case PlotKind::per: return "per";
    case PlotKind::rho: return "rho";
  }
  return "?";
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

enum class Axis { split, data_per, query_per, rho, mode };

double coord(const ResultRow& r, Axis a) {
  switch (a) {
    case Axis::split: return static_cast<double>(r.split);
    case Axis::data_per: return r.data_per;
    case Axis::query_per: return r.query_per;
    case Axis::rho: return r.rho;
    case Axis::mode: return static_cast<double>(r.mode);
  }
  return 0.0;
}

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::split: return "split";
    case Axis::data_per: return "data PER";
    case Axis::query_per: return "query PER";
    case Axis::rho: return "rho";
    case Axis::mode: return "mode";
  }
  return "?";
}

// Series label from every non-x axis that takes more than one value.
std::string label_for(const ResultRow& r, Axis x, const std::vector<Axis>& varying) {
  std::string label;
  for (Axis a : varying) {
    if (a == x) continue;
    if (!label.empty()) label += ", ";
    if (a == Axis::mode)
      label += to_string(r.mode);
    else
      label += std::string(axis_name(a)) + "=" + fmt(coord(r, a));
  }
  return label.empty() ? "all" : label;
}

Chart make_chart(const std::vector<ResultRow>& rows, Axis x, bool connections, std::string title) {
  std::vector<Axis> varying;
  for (Axis a : {Axis::mode, Axis::split, Axis::data_per, Axis::query_per, Axis::rho}) {
    std::set<double> v;
    for (const auto& r : rows) v.insert(coord(r, a));
    if (v.size() > 1) varying.push_back(a);
  }
  // label -> x -> (sum, count); std::map keeps the output order stable
  std::map<std::string, std::map<double, std::pair<double, int>>> acc;
  for (const auto& r : rows) {
    auto& cell = acc[label_for(r, x, varying)][coord(r, x)];
    cell.first += connections ? r.avg_connections : r.accuracy;
    cell.second += 1;
  }
  Chart c;
  c.title = std::move(title);
  c.x_label = axis_name(x);
  c.y_label = connections ? "avg. sidelink connections per device" : "accuracy";
  for (const auto& [label, points] : acc) {
    Series s;
    s.label = label;
    for (const auto& [xv, sum] : points) {
      s.x.push_back(xv);
      s.y.push_back(sum.first / sum.second);
    }
    c.series.push_back(std::move(s));
  }
  return c;
}

}  // namespace

std::string render_svg(const Chart& chart) {
  const double W = 720, H = 460, left = 70, right = 220, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  std::set<double> xs;
  double ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : chart.series) {
    xs.insert(s.x.begin(), s.x.end());
    for (double y : s.y) {
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xs.empty()) throw DomainError("render_svg: chart has no points");
  if (ymax - ymin < 1e-9) {
    ymin -= 0.5;
    ymax += 0.5;
  } else {
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
  }
  const std::vector<double> xv(xs.begin(), xs.end());
  auto px = [&](double x) {
    const auto idx = static_cast<double>(std::lower_bound(xv.begin(), xv.end(), x) - xv.begin());
    return xv.size() == 1 ? left + pw / 2 : left + pw * idx / static_cast<double>(xv.size() - 1);
  };
  auto py = [&](double y) { return top + ph * (1.0 - (y - ymin) / (ymax - ymin)); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(chart.title)
    << "</text>\n"
    << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (double x : xv)
    o << "<line x1=\"" << px(x) << "\" y1=\"" << top + ph << "\" x2=\"" << px(x) << "\" y2=\"" << top + ph + 5
      << "\" stroke=\"#333\"/><text x=\"" << px(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << fmt(x) << "</text>\n";
  for (int k = 0; k <= 5; ++k) {
    const double y = ymin + (ymax - ymin) * k / 5.0;
    o << "<line x1=\"" << left << "\" y1=\"" << py(y) << "\" x2=\"" << left + pw << "\" y2=\"" << py(y)
      << "\" stroke=\"#ddd\"/><text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">"
      << fmt(std::round(y * 1000) / 1000) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << escape(chart.x_label)
    << "</text>\n"
    << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(chart.y_label) << "</text>\n";

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    if (s.x.size() > 1) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < s.x.size(); ++k) o << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
      o << "\"/>\n";
    }
    for (std::size_t k = 0; k < s.x.size(); ++k)
      o << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.y[k]) << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(i);
    o << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 32 << "\" y2=\""
      << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << left + pw + 38 << "\" y=\""
      << ly << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<Chart> build_charts(const std::vector<ResultRow>& all, PlotKind kind) {
  std::vector<ResultRow> rows;
  for (const auto& r : all)
    if (!r.failed()) rows.push_back(r);
  if (rows.empty()) return {};
  switch (kind) {
    case PlotKind::split:
      return {make_chart(rows, Axis::split, false, "Accuracy vs splitting point")};
    case PlotKind::per:
      return {make_chart(rows, Axis::data_per, false, "Accuracy vs data and query PER")};
    case PlotKind::rho:
      return {make_chart(rows, Axis::rho, true, "Sidelink connections vs pruning threshold"),
              make_chart(rows, Axis::rho, false, "Accuracy vs pruning threshold")};
  }
  return {};
}

std::vector<std::filesystem::path> emit_plot(const std::filesystem::path& csv, PlotKind kind,
                                             const std::filesystem::path& out_dir) {
  const auto rows = read_results(csv);
  const auto charts = build_charts(rows, kind);
  if (charts.empty()) throw ParseError(csv.string() + ": no result rows to plot");
  std::vector<std::filesystem::path> written;
  for (const auto& c : charts) {
    const std::string metric = c.y_label == "accuracy" ? "accuracy" : "connections";
    auto path = out_dir / (csv.stem().string() + "_" + to_string(kind) + "_" + metric + ".svg");
    const std::string svg = render_svg(c);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write plot " + path.string());
    out << svg;
    if (!out) throw IoError("failed while writing " + path.string());
    written.push_back(std::move(path));
  }
  return written;
}

}  // namespace colinf
