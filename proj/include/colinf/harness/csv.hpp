#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "colinf/pipeline.hpp"

namespace colinf {

inline constexpr std::string_view kResultHeader =
    "split,data_per,query_per,rho,mode,seed,accuracy,avg_connections,query_tbs,feature_tbs,wall_time_s";

/// One (grid cell, seed) result. query_tbs and feature_tbs are per-round means.
struct ResultRow {
  std::size_t split = 0;
  double data_per = 0.0;
  double query_per = 0.0;
  double rho = 0.0;
  Mode mode = Mode::semantic;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double avg_connections = 0.0;
  double query_tbs = 0.0;
  double feature_tbs = 0.0;
  std::optional<double> wall_time_s;  // nullopt is written as "nan"
  std::string error;                  // non-empty marks a failed cell

  bool failed() const { return !error.empty(); }
};

/// Failed cells keep their coordinates, carry "nan" metrics and
/// "error:<kind>" in the wall_time_s column.
std::string format_row(const ResultRow& row);

/// Strict reader: the header must match exactly. Throws ParseError naming the
/// offending column.
std::vector<ResultRow> read_results(const std::filesystem::path& path);

}  // namespace colinf
