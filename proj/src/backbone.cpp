#include "colinf/backbone.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>
#include <string>

#include "colinf/checkpoint.hpp"
#include "colinf/error.hpp"

namespace colinf {

SplitModel::SplitModel(DenseParams layers, std::uint64_t seed) : params_(std::move(layers)), seed_(seed) {
  params_.validate();
}

SplitModel SplitModel::build(std::span<const std::size_t> widths, std::uint64_t seed) {
  Rng rng = make_stream(seed, StreamKind::init, 0);
  return SplitModel(make_mlp(widths, rng), seed);
}

void SplitModel::check_split(std::size_t split) const {
  if (split > depth())
    throw ConfigError("split index " + std::to_string(split) + " outside [0, " + std::to_string(depth()) + "]");
}

std::size_t SplitModel::dim(std::size_t split) const {
  check_split(split);
  return split == 0 ? params_.in_dim() : params_.layers[split - 1].out_dim();
}

std::vector<std::size_t> SplitModel::split_table() const {
  std::vector<std::size_t> t;
  for (std::size_t s = 0; s <= depth(); ++s) t.push_back(dim(s));
  return t;
}

Matrix SplitModel::encode(const Matrix& x, std::size_t split) const {
  check_split(split);
  return forward_layers(params_, 0, split, x);
}

Vector SplitModel::encode(const Vector& x, std::size_t split) const {
  return encode(Matrix(x.transpose()), split).row(0).transpose();
}

Matrix SplitModel::decode(const Matrix& features, std::size_t split) const {
  check_split(split);
  if (static_cast<std::size_t>(features.cols()) != dim(split))
    throw ShapeError("decode: feature length " + std::to_string(features.cols()) + " != dim(" +
                     std::to_string(split) + ") = " + std::to_string(dim(split)));
  return forward_layers(params_, split, depth(), features);
}

Vector SplitModel::decode(const Vector& feature, std::size_t split) const {
  return decode(Matrix(feature.transpose()), split).row(0).transpose();
}

Var SplitModel::decode(Tape& tape, Var features, std::size_t split) const {
  check_split(split);
  if (static_cast<std::size_t>(tape.value(features).cols()) != dim(split))
    throw ShapeError("decode: feature length does not match the split");
  return mlp_forward(tape, params_, nullptr, features, split, depth());
}

DenseParams& SplitModel::trainable_params() {
  if (frozen_) throw StateError("backbone is frozen");
  return params_;
}

double accuracy(const SplitModel& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const Matrix logits = model.forward(data.images);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (argmax(logits.row(static_cast<Eigen::Index>(i)).transpose()) == data.labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

SplitModel pretrain(SplitModel model, const Dataset& train, const Dataset& val, const PretrainCfg& cfg,
                    PretrainReport* report) {
  if (model.frozen()) throw StateError("pretrain: model is already frozen");
  if (cfg.batch == 0) throw ConfigError("pretrain: batch must be positive");
  if (train.size() == 0) throw ConfigError("pretrain: empty training set");
  DenseParams& params = model.trainable_params();
  DenseParams grads = zeros_like(params);
  RAdamState opt({cfg.lr}, block_sizes(params.views()));
  Rng rng = make_stream(cfg.seed, StreamKind::batch, 0xB0);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  PretrainReport rep;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, order.size() - start);
      Matrix x(static_cast<Eigen::Index>(n), train.images.cols());
      std::vector<std::size_t> labels(n);
      for (std::size_t k = 0; k < n; ++k) {
        x.row(static_cast<Eigen::Index>(k)) = train.images.row(static_cast<Eigen::Index>(order[start + k]));
        labels[k] = train.labels[order[start + k]];
      }
      for (auto v : grads.views()) std::fill(v.begin(), v.end(), 0.0);
      Tape tape;
      Var logits = mlp_forward(tape, params, &grads, tape.constant(std::move(x)));
      Var loss = tape.cross_entropy(logits, labels);
      const double l = tape.value(loss)(0, 0);
      if (!std::isfinite(l))
        throw TrainingError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
      tape.backward(loss);
      auto pv = params.views();
      auto gv = std::as_const(grads).views();
      radam_step(opt, pv, gv);
      loss_sum += l;
      ++batches;
    }
    rep.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  model.freeze();
  rep.val_accuracy = accuracy(model, val.size() ? val : train);
  if (report) *report = rep;
  if (cfg.min_accuracy > 0.0 && rep.val_accuracy < cfg.min_accuracy) {
    std::ostringstream msg;
    msg << "pretrain: held-out accuracy " << rep.val_accuracy << " below floor " << cfg.min_accuracy
        << " after " << cfg.epochs << " epochs (final loss "
        << (rep.epoch_loss.empty() ? NAN : rep.epoch_loss.back()) << ")";
    throw TrainingError(msg.str());
  }
  return model;
}

void save_backbone(const std::filesystem::path& path, const SplitModel& model) {
  Checkpoint c;
  c.kind = "backbone";
  c.seed = model.seed();
  for (auto d : model.split_table()) c.table.push_back(d);
  c.stacks.emplace_back("layers", model.params());
  save_checkpoint(path, c);
}

SplitModel load_backbone(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.kind != "backbone") throw ParseError(path.string() + ": expected a backbone checkpoint, got '" + c.kind + "'");
  SplitModel m(c.stack("layers"), c.seed);
  const auto table = m.split_table();
  if (!std::equal(table.begin(), table.end(), c.table.begin(), c.table.end()))
    throw ParseError(path.string() + ": split table does not match the layer stack");
  m.freeze();
  return m;
}

}  // namespace colinf
