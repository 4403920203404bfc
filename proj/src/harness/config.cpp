#include "colinf/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "colinf/error.hpp"

namespace colinf {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& key, const std::string& raw) {
  std::string v = trim(raw);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw ConfigError("key '" + key + "': expected a bracketed list, got '" + v + "'");
  v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (t.empty()) throw ConfigError("key '" + key + "': empty list element");
    out.push_back(t);
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + s + "' is not a number");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ConfigError("key '" + key + "': '" + s + "' is not a non-negative integer");
  return v;
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
  Config c;
  c.source_ = source;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto where = source + ":" + std::to_string(line_no);
    if (t.front() == '[' && t.find('=') == std::string::npos) {
      if (t.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const auto key = trim(std::string_view(t).substr(0, eq));
    const auto value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    c.values_[section.empty() ? key : section + "." + key] = value;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> k;
  for (const auto& [key, _] : values_) k.push_back(key);
  return k;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : to_uint(key, it->second);
}

std::vector<std::string> Config::get_list(const std::string& key, const std::vector<std::string>& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : split_list(key, it->second);
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& s : split_list(key, it->second)) out.push_back(to_double(key, s));
  return out;
}

std::vector<std::uint64_t> Config::get_uints(const std::string& key,
                                             const std::vector<std::uint64_t>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::uint64_t> out;
  for (const auto& s : split_list(key, it->second)) out.push_back(to_uint(key, s));
  return out;
}

void SweepSpec::validate() const {
  if (cells() == 0) throw ConfigError("sweep: every grid axis needs at least one value");
  if (seeds.empty()) throw ConfigError("sweep: at least one seed required");
  if (rounds == 0) throw ConfigError("sweep: rounds must be positive");
}

std::vector<std::size_t> ExperimentCfg::backbone_widths() const {
  std::vector<std::size_t> w{scenario.pixels()};
  w.insert(w.end(), backbone_hidden.begin(), backbone_hidden.end());
  w.push_back(scenario.classes);
  return w;
}

void ExperimentCfg::reseed(std::uint64_t s) {
  seed = s;
  scenario.seed = s;
  pretrain.seed = s;
}

namespace {

template <typename T>
std::vector<T> narrow(const std::vector<std::uint64_t>& v) {
  return std::vector<T>(v.begin(), v.end());
}

std::vector<std::uint64_t> widen(const std::vector<std::size_t>& v) {
  return std::vector<std::uint64_t>(v.begin(), v.end());
}

}  // namespace

ExperimentCfg experiment_from_config(const Config& c) {
  static const std::set<std::string> known = {
      "seed",
      "scenario.n_devices", "scenario.n_groups", "scenario.p_patch", "scenario.patch_scale",
      "scenario.image_side", "scenario.classes", "scenario.noise_sigma", "scenario.mean_contrast",
      "scenario.train_per_class", "scenario.val_per_class", "scenario.test_per_class",
      "backbone.hidden", "backbone.epochs", "backbone.lr", "backbone.batch", "backbone.min_accuracy",
      "comm.query_size", "comm.key_size", "comm.hidden",
      "channel.tbs", "channel.data_per", "channel.query_per", "channel.fill",
      "pipeline.split", "pipeline.rho", "pipeline.mode",
      "training.batch", "training.epochs", "training.batches_per_epoch", "training.lr",
      "eval.rounds",
      "sweep.split", "sweep.data_per", "sweep.query_per", "sweep.rho", "sweep.mode", "sweep.seeds",
      "sweep.rounds", "sweep.output", "sweep.plots", "sweep.record_wall_time",
  };
  for (const auto& k : c.keys())
    if (!known.count(k)) throw ConfigError(c.source() + ": unknown key '" + k + "'");

  ExperimentCfg e;
  e.reseed(c.get_uint("seed", e.seed));

  auto& s = e.scenario;
  s.n_devices = c.get_uint("scenario.n_devices", s.n_devices);
  s.n_groups = c.get_uint("scenario.n_groups", s.n_groups);
  s.p_patch = c.get_double("scenario.p_patch", s.p_patch);
  s.patch_scale = c.get_double("scenario.patch_scale", s.patch_scale);
  s.image_side = c.get_uint("scenario.image_side", s.image_side);
  s.classes = c.get_uint("scenario.classes", s.classes);
  s.noise_sigma = c.get_double("scenario.noise_sigma", s.noise_sigma);
  s.mean_contrast = c.get_double("scenario.mean_contrast", s.mean_contrast);
  s.train_per_class = c.get_uint("scenario.train_per_class", s.train_per_class);
  s.val_per_class = c.get_uint("scenario.val_per_class", s.val_per_class);
  s.test_per_class = c.get_uint("scenario.test_per_class", s.test_per_class);
  s.validate();

  e.backbone_hidden = narrow<std::size_t>(c.get_uints("backbone.hidden", widen(e.backbone_hidden)));
  e.pretrain.epochs = c.get_uint("backbone.epochs", e.pretrain.epochs);
  e.pretrain.lr = c.get_double("backbone.lr", e.pretrain.lr);
  e.pretrain.batch = c.get_uint("backbone.batch", e.pretrain.batch);
  e.pretrain.min_accuracy = c.get_double("backbone.min_accuracy", e.pretrain.min_accuracy);

  e.comm.query_size = c.get_uint("comm.query_size", e.comm.query_size);
  e.comm.key_size = c.get_uint("comm.key_size", e.comm.key_size);
  e.comm.hidden = narrow<std::size_t>(c.get_uints("comm.hidden", widen(e.comm.hidden)));

  auto& p = e.pipeline;
  p.data.tbs = p.query.tbs = c.get_uint("channel.tbs", p.data.tbs);
  p.data.fill = p.query.fill = c.get_double("channel.fill", p.data.fill);
  p.data.per = c.get_double("channel.data_per", p.data.per);
  p.query.per = c.get_double("channel.query_per", p.query.per);
  p.split = c.get_uint("pipeline.split", p.split);
  p.rho = c.get_double("pipeline.rho", p.rho);
  p.mode = parse_mode(c.get_string("pipeline.mode", to_string(p.mode)));
  p.train.batch = c.get_uint("training.batch", p.train.batch);
  p.train.epochs = c.get_uint("training.epochs", p.train.epochs);
  p.train.batches_per_epoch = c.get_uint("training.batches_per_epoch", p.train.batches_per_epoch);
  p.train.lr = c.get_double("training.lr", p.train.lr);
  p.validate();
  if (p.split > e.backbone_hidden.size() + 1)
    throw ConfigError("pipeline.split " + std::to_string(p.split) + " exceeds the backbone depth " +
                      std::to_string(e.backbone_hidden.size() + 1));

  e.eval_rounds = c.get_uint("eval.rounds", e.eval_rounds);

  auto& w = e.sweep;
  w.splits = narrow<std::size_t>(c.get_uints("sweep.split", {p.split}));
  w.data_pers = c.get_doubles("sweep.data_per", {p.data.per});
  w.query_pers = c.get_doubles("sweep.query_per", {p.query.per});
  w.rhos = c.get_doubles("sweep.rho", {p.rho});
  w.modes.clear();
  for (const auto& m : c.get_list("sweep.mode", {to_string(p.mode)})) w.modes.push_back(parse_mode(m));
  w.seeds = c.get_uints("sweep.seeds", {e.seed});
  w.rounds = c.get_uint("sweep.rounds", w.rounds);
  w.output = c.get_string("sweep.output", w.output);
  w.plots = c.get_list("sweep.plots", w.plots);
  const auto wall = c.get_string("sweep.record_wall_time", "false");
  if (wall != "true" && wall != "false") throw ConfigError("sweep.record_wall_time must be true or false");
  w.record_wall_time = wall == "true";
  w.validate();
  for (auto sp : w.splits)
    if (sp > e.backbone_hidden.size() + 1) throw ConfigError("sweep.split value " + std::to_string(sp) + " exceeds the backbone depth");
  return e;
}

}  // namespace colinf
