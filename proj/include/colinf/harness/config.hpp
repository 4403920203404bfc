#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "colinf/backbone.hpp"
#include "colinf/pipeline.hpp"
#include "colinf/scenario.hpp"
#include "colinf/semgroup.hpp"

namespace colinf {

/// Flat `key = value` file with `[section]` headers. Keys are addressed as
/// "section.key". Lists are bracketed and comma separated: `rho = [0, 0.01]`.
/// `#` starts a comment.
class Config {
 public:
  static Config parse(std::string_view text, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::vector<std::string> keys() const;
  const std::string& source() const { return source_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::uint64_t> get_uints(const std::string& key, const std::vector<std::uint64_t>& fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
};

struct SweepSpec {
  std::vector<std::size_t> splits{2};
  std::vector<double> data_pers{0.1};
  std::vector<double> query_pers{0.0};
  std::vector<double> rhos{0.0};
  std::vector<Mode> modes{Mode::semantic};
  std::vector<std::uint64_t> seeds{1};
  std::size_t rounds = 500;
  std::string output = "sweep.csv";
  std::vector<std::string> plots;
  bool record_wall_time = false;

  std::size_t cells() const {
    return splits.size() * data_pers.size() * query_pers.size() * rhos.size() * modes.size();
  }
  void validate() const;
};

/// Everything one run needs, with the shipped defaults.
struct ExperimentCfg {
  ScenarioCfg scenario;
  std::vector<std::size_t> backbone_hidden{512, 256, 128, 64};
  PretrainCfg pretrain;
  CommCfg comm;
  PipelineCfg pipeline;
  std::size_t eval_rounds = 2000;
  std::uint64_t seed = 1;
  SweepSpec sweep;

  /// Input width, hidden widths and class count.
  std::vector<std::size_t> backbone_widths() const;
  /// Applies `seed` to every derived seed field.
  void reseed(std::uint64_t s);
};

/// Reads every known key; unknown keys are a ConfigError naming the key.
ExperimentCfg experiment_from_config(const Config& cfg);

}  // namespace colinf
