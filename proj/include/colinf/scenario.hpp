#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "colinf/mathcore/dense.hpp"
#include "colinf/rng.hpp"

namespace colinf {

struct ScenarioCfg {
  std::size_t n_devices = 16;
  std::size_t n_groups = 4;
  double p_patch = 0.8;
  double patch_scale = 0.4;  // area fraction of the white patch
  std::size_t image_side = 32;
  std::size_t classes = 10;
  double noise_sigma = 0.15;
  /// Class means are 0.5 + mean_contrast * u with u uniform in [-1, 1] per pixel.
  double mean_contrast = 0.04;
  std::size_t train_per_class = 1000;
  std::size_t val_per_class = 50;
  std::size_t test_per_class = 100;
  std::uint64_t seed = 1;

  std::size_t pixels() const { return image_side * image_side; }
  void validate() const;
};

/// Rows are flattened (row-major) images in [0, 1].
struct Dataset {
  Matrix images;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
};

struct DatasetSplits {
  Matrix class_means;  // classes x pixels
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Class-balanced Gaussian-mean images, clipped to [0, 1].
DatasetSplits gen_dataset(const ScenarioCfg& cfg);

/// Writes one split as text: `#` header lines, then one row per sample with
/// the pixels followed by the label, values printed with 17 significant digits.
void write_dataset(const std::filesystem::path& path, const Dataset& data, std::size_t image_side);

/// Uniform index in [0, n) from one draw.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Device -> group map; a uniformly random partition into `n_groups` groups of
/// equal size. Throws ConfigError when the groups do not divide the devices.
std::vector<std::size_t> assign_groups(std::size_t n_devices, std::size_t n_groups, Rng& rng);

/// Side of the square patch covering `patch_scale` of the image area.
std::size_t patch_side(double patch_scale, std::size_t image_side);

/// White (1.0) square patch at a uniformly random position.
Vector corrupt(const Vector& image, std::size_t image_side, double patch_scale, Rng& rng);

/// Everything the simulator knows about one inference round.
struct RoundState {
  std::uint64_t index = 0;
  std::vector<std::size_t> group_of;      // device -> group
  std::vector<std::size_t> group_sample;  // group -> dataset row
  std::vector<std::size_t> group_label;   // group -> class
  Matrix observations;                    // device x pixels
  std::vector<std::uint8_t> corrupted;    // device -> patched?

  std::size_t n_devices() const { return group_of.size(); }
  std::size_t label(std::size_t device) const { return group_label[group_of[device]]; }
};

RoundState build_round(const ScenarioCfg& cfg, const Dataset& data, Rng& rng);

/// Round `index` of the stream rooted at `master_seed`.
RoundState build_round(const ScenarioCfg& cfg, const Dataset& data, std::uint64_t master_seed,
                       std::uint64_t index);

}  // namespace colinf
