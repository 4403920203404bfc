#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "colinf/mathcore/dense.hpp"
#include "colinf/mathcore/radam.hpp"
#include "colinf/mathcore/tape.hpp"
#include "colinf/scenario.hpp"

namespace colinf {

/// Layered classifier f = d o e with a movable split. Split s means the encoder
/// is layers [0, s) and the decoder layers [s, L); s = 0 shares the raw input
/// and s = L shares the logits.
class SplitModel {
 public:
  SplitModel() = default;
  SplitModel(DenseParams layers, std::uint64_t seed);

  /// widths = {input, hidden..., classes}.
  static SplitModel build(std::span<const std::size_t> widths, std::uint64_t seed);

  std::size_t depth() const { return params_.layers.size(); }
  std::size_t classes() const { return params_.out_dim(); }
  std::size_t input_dim() const { return params_.in_dim(); }
  /// Feature length at split s. Throws ConfigError for s > depth().
  std::size_t dim(std::size_t split) const;
  std::vector<std::size_t> split_table() const;
  std::uint64_t seed() const { return seed_; }

  Matrix encode(const Matrix& x, std::size_t split) const;
  Vector encode(const Vector& x, std::size_t split) const;
  Matrix decode(const Matrix& features, std::size_t split) const;
  Vector decode(const Vector& feature, std::size_t split) const;
  Matrix forward(const Matrix& x) const { return decode(encode(x, 0), 0); }

  /// Records the frozen decoder on a tape; gradients reach `features` only.
  Var decode(Tape& tape, Var features, std::size_t split) const;

  const DenseParams& params() const { return params_; }
  /// Mutable access for training. Throws StateError once frozen.
  DenseParams& trainable_params();
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  void check_split(std::size_t split) const;

  DenseParams params_;
  std::uint64_t seed_ = 0;
  bool frozen_ = false;
};

struct PretrainCfg {
  std::size_t epochs = 10;
  double lr = 3e-4;
  std::size_t batch = 64;
  /// Held-out clean accuracy the model must reach; 0 disables the check.
  double min_accuracy = 0.95;
  std::uint64_t seed = 1;
};

struct PretrainReport {
  std::vector<double> epoch_loss;
  double val_accuracy = 0.0;
};

/// Trains every layer on clean samples with RAdam, checks the held-out
/// accuracy floor and returns the frozen model. Throws TrainingError when the
/// floor is missed or the loss diverges.
SplitModel pretrain(SplitModel model, const Dataset& train, const Dataset& val,
                    const PretrainCfg& cfg, PretrainReport* report = nullptr);

double accuracy(const SplitModel& model, const Dataset& data);

void save_backbone(const std::filesystem::path& path, const SplitModel& model);
/// Loaded models come back frozen.
SplitModel load_backbone(const std::filesystem::path& path);

}  // namespace colinf
