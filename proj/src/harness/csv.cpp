#include "colinf/harness/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "colinf/error.hpp"

namespace colinf {

namespace {

std::string num(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

const char* const kColumns[] = {"split",    "data_per",        "query_per", "rho",
                                "mode",     "seed",            "accuracy",  "avg_connections",
                                "query_tbs", "feature_tbs",    "wall_time_s"};

double parse_num(const std::string& s, const char* column, std::size_t line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return d;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": column '" + column + "' is not numeric: '" + s + "'");
  }
}

}  // namespace

std::string format_row(const ResultRow& r) {
  std::ostringstream o;
  o << r.split << ',' << num("%g", r.data_per) << ',' << num("%g", r.query_per) << ',' << num("%g", r.rho) << ','
    << to_string(r.mode) << ',' << r.seed << ',';
  if (r.failed()) {
    o << "nan,nan,nan,nan,error:" << r.error;
    return o.str();
  }
  o << num("%.6f", r.accuracy) << ',' << num("%.6f", r.avg_connections) << ',' << num("%.4f", r.query_tbs) << ','
    << num("%.4f", r.feature_tbs) << ',' << (r.wall_time_s ? num("%.3f", *r.wall_time_s) : std::string("nan"));
  return o.str();
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file, missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream hs(line);
    std::string col;
    std::size_t k = 0;
    while (std::getline(hs, col, ',')) {
      if (k >= std::size(kColumns)) throw ParseError(path.string() + ": unexpected extra column '" + col + "'");
      if (col != kColumns[k])
        throw ParseError(path.string() + ": column " + std::to_string(k + 1) + " is '" + col + "', expected '" +
                         kColumns[k] + "'");
      ++k;
    }
    if (k != std::size(kColumns))
      throw ParseError(path.string() + ": missing column '" + std::string(kColumns[k]) + "'");
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != std::size(kColumns))
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                       " fields, expected " + std::to_string(std::size(kColumns)));
    ResultRow r;
    r.split = static_cast<std::size_t>(parse_num(f[0], kColumns[0], line_no));
    r.data_per = parse_num(f[1], kColumns[1], line_no);
    r.query_per = parse_num(f[2], kColumns[2], line_no);
    r.rho = parse_num(f[3], kColumns[3], line_no);
    try {
      r.mode = parse_mode(f[4]);
    } catch (const ConfigError&) {
      throw ParseError("line " + std::to_string(line_no) + ": column 'mode' has unknown value '" + f[4] + "'");
    }
    r.seed = static_cast<std::uint64_t>(parse_num(f[5], kColumns[5], line_no));
    if (f[10].rfind("error:", 0) == 0) {
      r.error = f[10].substr(6);
      rows.push_back(r);
      continue;
    }
    r.accuracy = parse_num(f[6], kColumns[6], line_no);
    r.avg_connections = parse_num(f[7], kColumns[7], line_no);
    r.query_tbs = parse_num(f[8], kColumns[8], line_no);
    r.feature_tbs = parse_num(f[9], kColumns[9], line_no);
    const double wall = parse_num(f[10], kColumns[10], line_no);
    if (!std::isnan(wall)) r.wall_time_s = wall;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace colinf
