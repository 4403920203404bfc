#include "colinf/pipeline.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "colinf/error.hpp"

namespace colinf {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::semantic: return "semantic";
    case Mode::naive: return "naive";
    case Mode::local: return "local";
    case Mode::noiseless: return "noiseless";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  if (text == "semantic") return Mode::semantic;
  if (text == "naive") return Mode::naive;
  if (text == "local") return Mode::local;
  if (text == "noiseless") return Mode::noiseless;
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

void PipelineCfg::validate() const {
  data.validate();
  query.validate();
  if (!std::isfinite(rho) || rho < 0.0) throw ConfigError("pipeline: rho must be finite and >= 0");
  if (train.batch == 0) throw ConfigError("pipeline: training batch must be positive");
}

ErasureChannelCfg PipelineCfg::effective_data() const {
  ErasureChannelCfg c = data;
  if (mode == Mode::noiseless) c.per = 0.0;
  return c;
}

ErasureChannelCfg PipelineCfg::effective_query() const {
  ErasureChannelCfg c = query;
  if (mode == Mode::noiseless) c.per = 0.0;
  return c;
}

double RoundMetrics::accuracy() const {
  return predictions.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double RoundMetrics::avg_connections() const {
  return predictions.empty() ? 0.0 : static_cast<double>(links) / static_cast<double>(predictions.size());
}

double EvalMetrics::accuracy() const {
  return devices ? static_cast<double>(hits) / static_cast<double>(devices) : 0.0;
}
double EvalMetrics::avg_connections() const {
  return devices ? static_cast<double>(links) / static_cast<double>(devices) : 0.0;
}
double EvalMetrics::query_tbs_per_round() const {
  return rounds ? static_cast<double>(query_tbs) / static_cast<double>(rounds) : 0.0;
}
double EvalMetrics::feature_tbs_per_round() const {
  return rounds ? static_cast<double>(feature_tbs) / static_cast<double>(rounds) : 0.0;
}

namespace {

Vector row_vec(const Matrix& m, std::size_t i) { return m.row(static_cast<Eigen::Index>(i)).transpose(); }

// Sends o_j over every link j -> receiver with a nonzero weight and combines.
Vector gather(const Matrix& features, const Vector& weights, std::size_t receiver, const ErasureChannelCfg& ch,
              std::uint64_t seed, std::uint64_t round, RoundMetrics& out) {
  const std::size_t n = static_cast<std::size_t>(features.rows());
  std::vector<Vector> received(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == receiver || weights(static_cast<Eigen::Index>(j)) == 0.0) {
      received[j] = Vector::Zero(features.cols());
      continue;
    }
    const Vector o = row_vec(features, j);
    Rng stream = link_stream(seed, round, j, receiver, MessageKind::feature);
    Transmission tx = transmit({o.data(), static_cast<std::size_t>(o.size())}, ch, stream);
    received[j] = Eigen::Map<const Vector>(tx.received.data(), static_cast<Eigen::Index>(tx.received.size()));
    out.feature_tbs += tx.record.sent;
    ++out.links;
  }
  return combine(weights, received, receiver, row_vec(features, receiver));
}

}  // namespace

RoundMetrics infer_round(const RoundState& round, const SplitModel& model, const CommModules& modules,
                         const PipelineCfg& cfg, std::uint64_t channel_seed) {
  cfg.validate();
  if (!model.frozen()) throw StateError("infer_round: backbone must be pretrained and frozen");
  const std::size_t n = round.n_devices();
  const Matrix features = model.encode(round.observations, cfg.split);
  const auto dim = static_cast<Eigen::Index>(features.cols());

  RoundMetrics out;
  Matrix fused(static_cast<Eigen::Index>(n), dim);
  const auto data_ch = cfg.effective_data();

  switch (cfg.mode) {
    case Mode::local:
      fused = features;
      break;
    case Mode::naive: {
      const Vector w = Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i)
        fused.row(static_cast<Eigen::Index>(i)) = gather(features, w, i, data_ch, channel_seed, round.index, out).transpose();
      break;
    }
    case Mode::semantic:
    case Mode::noiseless: {
      if (modules.feature_dim() != static_cast<std::size_t>(dim))
        throw ConfigError("infer_round: comm modules expect features of length " +
                          std::to_string(modules.feature_dim()) + ", split " + std::to_string(cfg.split) +
                          " gives " + std::to_string(dim));
      const auto query_ch = cfg.effective_query();
      const Matrix queries = mlp_forward_rows(modules.query, features);
      const Matrix keys = mlp_forward_rows(modules.key, features);
      Matrix scores(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j) {  // receiver of the queries, owner of the key
        const Vector key = row_vec(keys, j);
        for (std::size_t i = 0; i < n; ++i) {  // destination whose query is matched
          Vector q = row_vec(queries, i);
          if (i != j) {
            Rng stream = link_stream(channel_seed, round.index, i, j, MessageKind::query);
            Transmission tx = transmit({q.data(), static_cast<std::size_t>(q.size())}, query_ch, stream);
            q = Eigen::Map<const Vector>(tx.received.data(), q.size());
            out.query_tbs += tx.record.sent;
          }
          scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = match_score(key, q, modules.attention);
        }
      }
      out.matching = prune(build_matrix(scores), cfg.rho);
      for (std::size_t i = 0; i < n; ++i)
        fused.row(static_cast<Eigen::Index>(i)) =
            gather(features, row_vec(out.matching.pruned, i), i, data_ch, channel_seed, round.index, out).transpose();
      break;
    }
  }

  out.logits = model.decode(fused, cfg.split);
  out.predictions.resize(n);
  out.correct.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.predictions[i] = argmax(row_vec(out.logits, i));
    out.correct[i] = out.predictions[i] == round.label(i) ? 1 : 0;
    out.hits += out.correct[i];
  }
  return out;
}

EvalMetrics evaluate(const SplitModel& model, const CommModules& modules, const PipelineCfg& cfg,
                     const ScenarioCfg& scenario, const Dataset& data, std::size_t n_rounds,
                     std::uint64_t seed) {
  if (n_rounds == 0) throw ConfigError("evaluate: need at least one round");
  EvalMetrics m;
  for (std::size_t r = 0; r < n_rounds; ++r) {
    const RoundState round = build_round(scenario, data, seed, r);
    const RoundMetrics rm = infer_round(round, model, modules, cfg, seed);
    ++m.rounds;
    m.devices += rm.devices();
    m.hits += rm.hits;
    m.links += rm.links;
    m.query_tbs += rm.query_tbs;
    m.feature_tbs += rm.feature_tbs;
  }
  return m;
}

Matrix encode_rounds(const SplitModel& model, std::span<const RoundState> rounds, std::size_t split) {
  if (rounds.empty()) return Matrix(0, static_cast<Eigen::Index>(model.dim(split)));
  const auto n = rounds.front().observations.rows();
  Matrix obs(n * static_cast<Eigen::Index>(rounds.size()), rounds.front().observations.cols());
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    if (rounds[r].observations.rows() != n) throw ShapeError("encode_rounds: rounds differ in device count");
    obs.middleRows(static_cast<Eigen::Index>(r) * n, n) = rounds[r].observations;
  }
  return model.encode(obs, split);
}

Var record_rounds(Tape& tape, const SplitModel& model, const CommModules& modules, CommModules* grads,
                  const PipelineCfg& cfg, const Matrix& features, const LinkMask& query_mask,
                  const LinkMask& feature_mask) {
  Var f = tape.constant(features);
  Var q = mlp_forward(tape, modules.query, grads ? &grads->query : nullptr, f);
  Var k = mlp_forward(tape, modules.key, grads ? &grads->key : nullptr, f);
  Var wa = grads ? tape.parameter(modules.attention, {grads->attention.data(), static_cast<std::size_t>(grads->attention.size())})
                 : tape.constant(modules.attention);
  Var projected = tape.affine(k, wa);  // rows are (W_a * key)^T
  Var scores = tape.bilinear_scores(q, projected, query_mask,
                                    1.0 / std::sqrt(static_cast<double>(modules.key_size())));
  Var weights = tape.row_softmax(scores);
  if (cfg.rho > 0.0) weights = tape.threshold(weights, cfg.rho);
  Var fused = tape.weighted_sum(weights, f, feature_mask);
  return model.decode(tape, fused, cfg.split);
}

std::uint64_t training_seed(std::uint64_t seed) { return mix64(seed ^ 0x747261696e000000ULL); }

CommModules train_comm(const SplitModel& model, const PipelineCfg& cfg, const ScenarioCfg& scenario,
                       const Dataset& train, std::uint64_t seed, const CommCfg& comm, TrainReport* report,
                       TrainLimits limits) {
  cfg.validate();
  scenario.validate();
  if (!model.frozen()) throw StateError("train_comm: backbone must be pretrained and frozen");
  Rng init = make_stream(seed, StreamKind::init, 1, cfg.split);
  CommModules modules = CommModules::build(model.dim(cfg.split), comm, init);
  TrainReport rep;
  if (cfg.mode == Mode::local || cfg.mode == Mode::naive) {
    if (report) *report = rep;
    return modules;  // nothing to learn
  }

  const auto query_ch = cfg.effective_query();
  const auto data_ch = cfg.effective_data();
  const std::uint64_t tseed = training_seed(seed);
  const std::size_t n = scenario.n_devices;
  CommModules grads = zeros_like(modules);
  RAdamState opt({cfg.train.lr}, block_sizes(modules.views()));

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < cfg.train.batches_per_epoch; ++b) {
      if (limits.max_steps && step >= limits.max_steps) break;
      const std::uint64_t first = static_cast<std::uint64_t>(step) * cfg.train.batch;
      std::vector<RoundState> rounds;
      rounds.reserve(cfg.train.batch);
      std::vector<std::size_t> labels;
      labels.reserve(cfg.train.batch * n);
      for (std::size_t r = 0; r < cfg.train.batch; ++r) {
        rounds.push_back(build_round(scenario, train, tseed, first + r));
        for (std::size_t i = 0; i < n; ++i) labels.push_back(rounds.back().label(i));
      }
      const Matrix features = encode_rounds(model, rounds, cfg.split);
      const auto qmask = draw_link_mask(query_ch, tseed, first, cfg.train.batch, n, modules.query_size(),
                                        MessageKind::query);
      const auto fmask = draw_link_mask(data_ch, tseed, first, cfg.train.batch, n,
                                        static_cast<std::size_t>(features.cols()), MessageKind::feature);

      for (auto v : grads.views()) std::fill(v.begin(), v.end(), 0.0);
      Tape tape;
      Var logits = record_rounds(tape, model, modules, &grads, cfg, features, qmask, fmask);
      Var loss = tape.cross_entropy(logits, labels);
      const double l = tape.value(loss)(0, 0);
      if (!std::isfinite(l)) {
        std::ostringstream msg;
        msg << "train_comm: non-finite loss at epoch " << epoch << " step " << step;
        throw TrainingError(msg.str());
      }
      tape.backward(loss);
      auto pv = modules.views();
      auto gv = std::as_const(grads).views();
      radam_step(opt, pv, gv);
      loss_sum += l;
      ++batches;
      ++step;
    }
    if (batches) rep.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  rep.steps = step;
  if (report) *report = rep;
  return modules;
}

}  // namespace colinf
