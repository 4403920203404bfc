#include "colinf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <string>

#include "colinf/error.hpp"

namespace colinf {

void ScenarioCfg::validate() const {
  if (n_devices == 0 || n_groups == 0) throw ConfigError("scenario: devices and groups must be positive");
  if (n_devices % n_groups != 0)
    throw ConfigError("scenario: " + std::to_string(n_groups) + " groups do not divide " +
                      std::to_string(n_devices) + " devices");
  if (!(p_patch >= 0.0 && p_patch <= 1.0)) throw ConfigError("scenario: p_patch outside [0, 1]");
  if (!(patch_scale > 0.0 && patch_scale < 1.0)) throw ConfigError("scenario: patch_scale outside (0, 1)");
  if (image_side == 0 || classes < 2) throw ConfigError("scenario: need an image and at least 2 classes");
  if (noise_sigma < 0.0) throw ConfigError("scenario: noise_sigma must be >= 0");
  if (!(mean_contrast >= 0.0 && mean_contrast <= 0.5))
    throw ConfigError("scenario: mean_contrast outside [0, 0.5]");
  if (train_per_class == 0 || test_per_class == 0) throw ConfigError("scenario: empty split");
}

namespace {

Dataset sample_split(const Matrix& means, std::size_t per_class, double sigma, Rng& rng) {
  const auto classes = static_cast<std::size_t>(means.rows());
  Dataset d;
  d.images.resize(static_cast<Eigen::Index>(classes * per_class), means.cols());
  d.labels.resize(classes * per_class);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < classes * per_class; ++i) {
    const std::size_t c = i % classes;
    d.labels[i] = c;
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index p = 0; p < means.cols(); ++p) {
      const double v = means(static_cast<Eigen::Index>(c), p) + sigma * noise(rng);
      d.images(row, p) = std::clamp(v, 0.0, 1.0);
    }
  }
  return d;
}

}  // namespace

DatasetSplits gen_dataset(const ScenarioCfg& cfg) {
  cfg.validate();
  DatasetSplits s;
  Rng rng = make_stream(cfg.seed, StreamKind::dataset);
  s.class_means.resize(static_cast<Eigen::Index>(cfg.classes), static_cast<Eigen::Index>(cfg.pixels()));
  for (Eigen::Index c = 0; c < s.class_means.rows(); ++c)
    for (Eigen::Index p = 0; p < s.class_means.cols(); ++p)
      s.class_means(c, p) = 0.5 + cfg.mean_contrast * (2.0 * uniform01(rng) - 1.0);
  Rng train_rng = make_stream(cfg.seed, StreamKind::dataset, 1);
  Rng val_rng = make_stream(cfg.seed, StreamKind::dataset, 2);
  Rng test_rng = make_stream(cfg.seed, StreamKind::dataset, 3);
  s.train = sample_split(s.class_means, cfg.train_per_class, cfg.noise_sigma, train_rng);
  s.val = sample_split(s.class_means, cfg.val_per_class, cfg.noise_sigma, val_rng);
  s.test = sample_split(s.class_means, cfg.test_per_class, cfg.noise_sigma, test_rng);
  return s;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data, std::size_t image_side) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file " + path.string());
  out << "# colinf dataset v1\n";
  out << "# samples " << data.size() << " image_side " << image_side << "\n";
  out << "# columns: " << image_side * image_side << " pixel values (row-major), then the label\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index p = 0; p < data.images.cols(); ++p) out << data.images(row, p) << ' ';
    out << data.labels[i] << '\n';
  }
  if (!out) throw IoError("failed while writing " + path.string());
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return std::min(k, n - 1);
}

std::vector<std::size_t> assign_groups(std::size_t n_devices, std::size_t n_groups, Rng& rng) {
  if (n_groups == 0 || n_devices % n_groups != 0)
    throw ConfigError("assign_groups: " + std::to_string(n_groups) + " groups do not divide " +
                      std::to_string(n_devices) + " devices");
  std::vector<std::size_t> order(n_devices);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n_devices; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  const std::size_t size = n_devices / n_groups;
  std::vector<std::size_t> group_of(n_devices);
  for (std::size_t k = 0; k < n_devices; ++k) group_of[order[k]] = k / size;
  return group_of;
}

std::size_t patch_side(double patch_scale, std::size_t image_side) {
  const double side = std::round(std::sqrt(std::max(patch_scale, 0.0)) * static_cast<double>(image_side));
  return std::min(static_cast<std::size_t>(side), image_side);
}

Vector corrupt(const Vector& image, std::size_t image_side, double patch_scale, Rng& rng) {
  if (static_cast<std::size_t>(image.size()) != image_side * image_side)
    throw ShapeError("corrupt: image is not image_side x image_side");
  const std::size_t side = patch_side(patch_scale, image_side);
  Vector out = image;
  if (side == 0) return out;
  const std::size_t span = image_side - side + 1;
  const std::size_t top = uniform_index(rng, span);
  const std::size_t left = uniform_index(rng, span);
  for (std::size_t r = top; r < top + side; ++r)
    out.segment(static_cast<Eigen::Index>(r * image_side + left), static_cast<Eigen::Index>(side)).setConstant(1.0);
  return out;
}

RoundState build_round(const ScenarioCfg& cfg, const Dataset& data, Rng& rng) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("build_round: empty dataset");
  RoundState st;
  st.group_of = assign_groups(cfg.n_devices, cfg.n_groups, rng);
  st.group_sample.resize(cfg.n_groups);
  st.group_label.resize(cfg.n_groups);
  for (std::size_t g = 0; g < cfg.n_groups; ++g) {
    st.group_sample[g] = uniform_index(rng, data.size());
    st.group_label[g] = data.labels[st.group_sample[g]];
  }
  st.observations.resize(static_cast<Eigen::Index>(cfg.n_devices), data.images.cols());
  st.corrupted.assign(cfg.n_devices, 0);
  for (std::size_t i = 0; i < cfg.n_devices; ++i) {
    const Vector clean = data.images.row(static_cast<Eigen::Index>(st.group_sample[st.group_of[i]])).transpose();
    if (uniform01(rng) < cfg.p_patch) {
      st.corrupted[i] = 1;
      st.observations.row(static_cast<Eigen::Index>(i)) = corrupt(clean, cfg.image_side, cfg.patch_scale, rng).transpose();
    } else {
      st.observations.row(static_cast<Eigen::Index>(i)) = clean.transpose();
    }
  }
  return st;
}

RoundState build_round(const ScenarioCfg& cfg, const Dataset& data, std::uint64_t master_seed,
                       std::uint64_t index) {
  Rng rng = make_stream(master_seed, StreamKind::scenario, index);
  RoundState st = build_round(cfg, data, rng);
  st.index = index;
  return st;
}

}  // namespace colinf
