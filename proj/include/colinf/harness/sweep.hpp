#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "colinf/backbone.hpp"
#include "colinf/harness/config.hpp"
#include "colinf/harness/csv.hpp"
#include "colinf/scenario.hpp"

namespace colinf {

/// Dataset plus frozen backbone shared by every cell of a run.
struct World {
  DatasetSplits data;
  SplitModel backbone;
};

/// Generates the dataset and pretrains the backbone, or loads it from
/// `backbone_path` when that file exists.
World prepare_world(const ExperimentCfg& cfg, const std::optional<std::filesystem::path>& backbone_path = {},
                    std::ostream* log = nullptr);

/// Seed actually used for training and evaluation of grid seed `grid_seed`.
std::uint64_t cell_seed(std::uint64_t master, std::uint64_t grid_seed);

/// Runs every (cell, seed) in grid order (split, data_per, query_per, rho,
/// mode, seed), training comm modules once per channel configuration and seed
/// and pruning at evaluation time. Rows are appended to `csv` as they finish.
/// Throws IoError when the file cannot be written; a failing cell yields an
/// error row and the sweep continues.
std::vector<ResultRow> run_sweep(const ExperimentCfg& cfg, const World& world, const std::filesystem::path& csv,
                                 std::ostream* log = nullptr);

}  // namespace colinf
