#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "colinf/backbone.hpp"
#include "colinf/channel.hpp"
#include "colinf/scenario.hpp"
#include "colinf/semgroup.hpp"

namespace colinf {

/// semantic: learned matching over noisy channels. noiseless: the same with
/// every PER forced to 0. naive: equal weights 1/N over all devices. local: no
/// collaboration.
enum class Mode { semantic, naive, local, noiseless };

const char* to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct TrainCfg {
  std::size_t batch = 64;  // rounds per optimizer step
  std::size_t epochs = 30;
  std::size_t batches_per_epoch = 10;
  double lr = 1e-3;
};

struct PipelineCfg {
  std::size_t split = 2;
  ErasureChannelCfg data{40, 0.1, 0.0};
  ErasureChannelCfg query{40, 0.0, 0.0};  // queries are reliable unless overridden
  double rho = 0.0;
  Mode mode = Mode::semantic;
  TrainCfg train;

  void validate() const;
  ErasureChannelCfg effective_data() const;
  ErasureChannelCfg effective_query() const;
};

struct RoundMetrics {
  std::vector<std::size_t> predictions;
  std::vector<std::uint8_t> correct;
  Matrix logits;           // device x classes
  MatchingMatrix matching;  // empty unless the mode builds one
  std::size_t hits = 0;
  std::size_t links = 0;   // feature unicasts
  std::size_t query_tbs = 0;
  std::size_t feature_tbs = 0;
  std::size_t key_tbs = 0;  // keys stay local; always 0

  std::size_t devices() const { return predictions.size(); }
  double accuracy() const;
  double avg_connections() const;
};

/// One inference round. Channel draws come from link streams rooted at
/// `channel_seed` and keyed by the round index, so the same (seed, round)
/// always sees the same erasures.
RoundMetrics infer_round(const RoundState& round, const SplitModel& model, const CommModules& modules,
                         const PipelineCfg& cfg, std::uint64_t channel_seed);

/// Integer totals, so the aggregate does not depend on accumulation order.
struct EvalMetrics {
  std::size_t rounds = 0;
  std::size_t devices = 0;  // device inferences
  std::size_t hits = 0;
  std::size_t links = 0;
  std::size_t query_tbs = 0;
  std::size_t feature_tbs = 0;

  double accuracy() const;
  double avg_connections() const;
  double query_tbs_per_round() const;
  double feature_tbs_per_round() const;
};

EvalMetrics evaluate(const SplitModel& model, const CommModules& modules, const PipelineCfg& cfg,
                     const ScenarioCfg& scenario, const Dataset& data, std::size_t n_rounds,
                     std::uint64_t seed);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

/// Optional cap on optimizer steps, used by tests and quick runs.
struct TrainLimits {
  std::size_t max_steps = 0;  // 0 = no cap
};

/// Batched forward pass of `rounds` over the trainable modules with the given
/// erasure patterns, recorded on `tape`. Returns the logits node.
Var record_rounds(Tape& tape, const SplitModel& model, const CommModules& modules, CommModules* grads,
                  const PipelineCfg& cfg, const Matrix& features, const LinkMask& query_mask,
                  const LinkMask& feature_mask);

/// Stacks the devices of consecutive rounds and encodes them.
Matrix encode_rounds(const SplitModel& model, std::span<const RoundState> rounds, std::size_t split);

/// Trains the comm modules with the channels active and the backbone frozen.
/// The returned modules are the only thing that changes.
CommModules train_comm(const SplitModel& model, const PipelineCfg& cfg, const ScenarioCfg& scenario,
                       const Dataset& train, std::uint64_t seed, const CommCfg& comm = {},
                       TrainReport* report = nullptr, TrainLimits limits = {});

/// Seed for the training-time round and channel streams; disjoint from the
/// evaluation streams rooted at the plain seed.
std::uint64_t training_seed(std::uint64_t seed);

}  // namespace colinf
