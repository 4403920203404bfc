// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Criteria 4-8 share one pretrained world.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "colinf/harness/config.hpp"
#include "colinf/harness/sweep.hpp"
#include "colinf/pipeline.hpp"

using namespace colinf;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
std::set<int> only;  // empty runs everything

void report(int id, const std::string& name, const Outcome& o, double seconds) {
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), seconds);
  std::fflush(stdout);
}

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
  if (!only.empty() && !only.count(id)) return;
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  report(id, name, o, std::chrono::duration<double>(Clock::now() - t0).count());
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

Outcome row_stochasticity() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    // scores on very different scales, including ones that saturate exp
    const double scale = std::pow(10.0, 3.0 * uniform01(rng) - 1.0);
    Matrix s(16, 16);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = scale * g(rng);
    const MatchingMatrix m = build_matrix(s);
    for (Eigen::Index i = 0; i < 16; ++i) worst = std::max(worst, std::abs(m.normalized.row(i).sum() - 1.0));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 5.0, "max |row sum - 1| = " + fmt("%.3g", worst) + " over 1e4 matrices"};
}

Outcome channel_statistics() {
  const auto t0 = Clock::now();
  std::vector<double> payload(40 * 100000);
  for (std::size_t k = 0; k < payload.size(); ++k) payload[k] = 0.5 + static_cast<double>(k % 97);
  Rng a = link_stream(2024, 0, 0, 1, MessageKind::feature);
  const Transmission tx = transmit(payload, {40, 0.1, 0.0}, a);
  const double frac = static_cast<double>(tx.record.erased) / static_cast<double>(tx.record.sent);

  Rng b = link_stream(2024, 1, 0, 1, MessageKind::feature);
  const Transmission clean = transmit(payload, {40, 0.0, 0.0}, b);
  Rng c = link_stream(2024, 2, 0, 1, MessageKind::feature);
  const Transmission lost = transmit(payload, {40, 1.0, 0.0}, c);
  const bool identity = clean.received == payload && clean.record.erased == 0;
  bool constant = lost.record.erased == lost.record.sent;
  for (double v : lost.received) constant = constant && v == 0.0;
  const double secs = seconds_since(t0);
  return {tx.record.sent == 100000 && frac >= 0.0972 && frac <= 0.1028 && identity && constant && secs < 5.0,
          "erased fraction " + fmt("%.5f", frac) + " over 1e5 TBs; PER=0 identity " + (identity ? "yes" : "no") +
              "; PER=1 constant " + (constant ? "yes" : "no")};
}

Outcome gradient_check(const World& w, const ExperimentCfg& cfg) {
  const auto t0 = Clock::now();
  PipelineCfg p = cfg.pipeline;
  p.split = 2;
  p.mode = Mode::noiseless;  // channel disabled
  Rng init = make_stream(77, StreamKind::init, 1, p.split);
  CommModules m = CommModules::build(w.backbone.dim(p.split), cfg.comm, init);

  const std::uint64_t seed = 4242;
  const RoundState round = build_round(cfg.scenario, w.data.train, seed, 0);
  const std::size_t n = round.n_devices();
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = round.label(i);

  // Oracle: the per-link inference path, mean cross-entropy over devices.
  auto oracle = [&](const CommModules& mm) {
    const RoundMetrics rm = infer_round(round, w.backbone, mm, p, seed);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i)
      total += cross_entropy(rm.logits.row(static_cast<Eigen::Index>(i)).transpose(), labels[i]);
    return total / static_cast<double>(n);
  };

  const Matrix features = encode_rounds(w.backbone, std::span(&round, 1), p.split);
  const LinkMask qmask = draw_link_mask(p.effective_query(), seed, 0, 1, n, m.query_size(), MessageKind::query);
  const LinkMask fmask = draw_link_mask(p.effective_data(), seed, 0, 1, n,
                                        static_cast<std::size_t>(features.cols()), MessageKind::feature);
  CommModules grads = zeros_like(m);
  Tape tape;
  Var loss = tape.cross_entropy(record_rounds(tape, w.backbone, m, &grads, p, features, qmask, fmask), labels);
  const double forward_gap = std::abs(tape.value(loss)(0, 0) - oracle(m));
  tape.backward(loss);

  // Blocks: query MLP layers, key MLP layers, then the attention matrix.
  auto pv = m.views();
  auto gv = std::as_const(grads).views();
  const std::size_t q_blocks = 2 * m.query.layers.size(), k_blocks = 2 * m.key.layers.size();
  auto owner = [&](std::size_t block) { return block < q_blocks ? 0 : block < q_blocks + k_blocks ? 1 : 2; };

  // Central differences at h carry round-off of about eps * loss / h ~ 1e-11,
  // so relative error is only meaningful above kFloor. Below it the analytic
  // and numeric values must agree to kAbsolute instead.
  const double h = 1e-4, kFloor = 1e-6, kAbsolute = 1e-10;
  Rng pick(9);
  std::size_t checked[3] = {0, 0, 0}, tiny = 0, bad = 0;
  double worst = 0.0;
  std::string worst_at;
  for (int group = 0; group < 3; ++group) {
    std::vector<std::size_t> blocks;
    for (std::size_t b = 0; b < pv.size(); ++b)
      if (owner(b) == group) blocks.push_back(b);
    for (int tries = 0; checked[group] < 40 && tries < 2000; ++tries) {
      const std::size_t b = blocks[uniform_index(pick, blocks.size())];
      const std::size_t k = uniform_index(pick, pv[b].size());
      double& x = pv[b][k];
      const double saved = x;
      x = saved + h;
      const double up = oracle(m);
      x = saved - h;
      const double down = oracle(m);
      x = saved;
      const double numeric = (up - down) / (2 * h), analytic = gv[b][k];
      if (std::max(std::abs(analytic), std::abs(numeric)) < kFloor) {
        ++tiny;
        if (std::abs(analytic - numeric) > kAbsolute) ++bad;
        continue;
      }
      const double e = rel_err(analytic, numeric);
      ++checked[group];
      if (e > 1e-4) ++bad;
      if (e > worst) {
        worst = e;
        worst_at = "block " + std::to_string(b) + " index " + std::to_string(k);
      }
    }
  }
  const double secs = seconds_since(t0);
  const std::size_t total = checked[0] + checked[1] + checked[2];
  return {bad == 0 && total >= 120 && forward_gap < 1e-10 && secs < 60.0,
          std::to_string(total) + " coordinates with |grad| >= 1e-6 (" + std::to_string(checked[0]) + " query, " +
              std::to_string(checked[1]) + " key, " + std::to_string(checked[2]) + " attention), worst relative error " +
              fmt("%.3g", worst) + (worst_at.empty() ? "" : " at " + worst_at) + "; " + std::to_string(tiny) +
              " near-zero coordinates within 1e-10; " + std::to_string(bad) + " failures"};
}

Outcome freezing(const World& w, const ExperimentCfg& cfg) {
  const DenseParams before = w.backbone.params();
  PipelineCfg p = cfg.pipeline;
  p.split = 2;
  p.train.batch = 8;
  p.train.epochs = 20;
  p.train.batches_per_epoch = 10;
  TrainReport rep;
  train_comm(w.backbone, p, cfg.scenario, w.data.train, 31, cfg.comm, &rep, {200});
  const bool same = bit_equal(before, w.backbone.params());
  return {same && rep.steps == 200, std::to_string(rep.steps) + " comm-training steps, backbone " +
                                        (same ? "bit-identical" : "CHANGED")};
}

struct Trained {
  std::map<std::pair<double, double>, CommModules> modules;  // (data PER, query PER)
};

const CommModules& trained_at(Trained& t, const World& w, const ExperimentCfg& cfg, double data_per, double query_per,
                              std::uint64_t seed) {
  auto key = std::make_pair(data_per, query_per);
  auto it = t.modules.find(key);
  if (it != t.modules.end()) return it->second;
  PipelineCfg p = cfg.pipeline;
  p.split = 2;
  p.data.per = data_per;
  p.query.per = query_per;
  p.rho = 0.0;
  TrainReport rep;
  const auto t0 = Clock::now();
  CommModules m = train_comm(w.backbone, p, cfg.scenario, w.data.train, seed, cfg.comm, &rep);
  // informational: loss averaged over 5-epoch blocks should not increase
  std::vector<double> blocks;
  for (std::size_t e = 0; e + 5 <= rep.epoch_loss.size(); e += 5)
    blocks.push_back(std::accumulate(rep.epoch_loss.begin() + e, rep.epoch_loss.begin() + e + 5, 0.0) / 5.0);
  const bool smooth = std::is_sorted(blocks.rbegin(), blocks.rend());
  std::printf("  trained data_per=%g query_per=%g: %zu steps, loss %.4f -> %.4f, 5-epoch means %s (%.0f s)\n",
              data_per, query_per, rep.steps, rep.epoch_loss.front(), rep.epoch_loss.back(),
              smooth ? "non-increasing" : "not monotone", seconds_since(t0));
  std::fflush(stdout);
  return t.modules.emplace(key, std::move(m)).first->second;
}

EvalMetrics eval_at(const World& w, const ExperimentCfg& cfg, const CommModules& m, Mode mode, double data_per,
                    double query_per, double rho, std::uint64_t seed) {
  PipelineCfg p = cfg.pipeline;
  p.split = 2;
  p.mode = mode;
  p.data.per = data_per;
  p.query.per = query_per;
  p.rho = rho;
  return evaluate(w.backbone, m, p, cfg.scenario, w.data.test, cfg.eval_rounds, seed);
}

}  // namespace

// usage: colinf_acceptance [--only=3,5] [config]
int main(int argc, char** argv) {
  ExperimentCfg cfg;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg.rfind("--only=", 0) == 0) {
      std::stringstream ids(arg.substr(7));
      for (std::string id; std::getline(ids, id, ',');) only.insert(std::stoi(id));
    } else {
      cfg = experiment_from_config(Config::load(arg));
    }
  }
  const std::uint64_t train_seed = cell_seed(cfg.seed, 1), eval_seed = train_seed;
  std::cout << "acceptance: N=" << cfg.scenario.n_devices << " G=" << cfg.scenario.n_groups
            << " p=" << cfg.scenario.p_patch << " tbs=" << cfg.pipeline.data.tbs << " eval rounds=" << cfg.eval_rounds
            << " training " << cfg.pipeline.train.epochs << "x" << cfg.pipeline.train.batches_per_epoch
            << " steps of " << cfg.pipeline.train.batch << " rounds, lr " << cfg.pipeline.train.lr << std::endl;

  run(1, "row-stochasticity", row_stochasticity);
  run(2, "channel statistics", channel_statistics);

  const auto t_world = Clock::now();
  std::ostringstream log;
  const World world = prepare_world(cfg, std::nullopt, &log);
  std::printf("  %s  world ready (%.0f s)\n", log.str().c_str(), seconds_since(t_world));

  run(3, "gradient correctness", [&] { return gradient_check(world, cfg); });
  run(4, "freezing contract", [&] { return freezing(world, cfg); });

  Trained trained;
  const double per = cfg.pipeline.data.per;
  run(5, "split-2 ordering", [&]() -> Outcome {
    const CommModules& sem = trained_at(trained, world, cfg, per, 0.0, train_seed);
    const CommModules& clean = trained_at(trained, world, cfg, 0.0, 0.0, train_seed);
    const double a_sem = eval_at(world, cfg, sem, Mode::semantic, per, 0.0, 0.0, eval_seed).accuracy();
    const double a_loc = eval_at(world, cfg, sem, Mode::local, per, 0.0, 0.0, eval_seed).accuracy();
    const double a_nai = eval_at(world, cfg, sem, Mode::naive, per, 0.0, 0.0, eval_seed).accuracy();
    const double a_nl = eval_at(world, cfg, clean, Mode::noiseless, per, 0.0, 0.0, eval_seed).accuracy();
    const bool ok = a_sem - a_loc >= 0.10 && a_sem - a_nai >= 0.10 && a_nl >= a_sem - 0.02;
    return {ok, "semantic " + fmt("%.4f", a_sem) + ", local " + fmt("%.4f", a_loc) + ", naive " +
                    fmt("%.4f", a_nai) + ", noiseless " + fmt("%.4f", a_nl) + " over " +
                    std::to_string(cfg.eval_rounds) + " rounds"};
  });

  run(6, "query vs data PER", [&]() -> Outcome {
    const double base = eval_at(world, cfg, trained_at(trained, world, cfg, 0.0, 0.0, train_seed), Mode::semantic, 0.0,
                                0.0, 0.0, eval_seed).accuracy();
    const double data = eval_at(world, cfg, trained_at(trained, world, cfg, 0.3, 0.0, train_seed), Mode::semantic, 0.3,
                                0.0, 0.0, eval_seed).accuracy();
    const double query = eval_at(world, cfg, trained_at(trained, world, cfg, 0.0, 0.3, train_seed), Mode::semantic,
                                 0.0, 0.3, 0.0, eval_seed).accuracy();
    const double drop_q = base - query, drop_d = base - data;
    return {drop_q >= drop_d, "accuracy at PER 0: " + fmt("%.4f", base) + "; query PER 0.3: " + fmt("%.4f", query) +
                                  " (drop " + fmt("%.4f", drop_q) + "); data PER 0.3: " + fmt("%.4f", data) +
                                  " (drop " + fmt("%.4f", drop_d) + ")"};
  });

  run(7, "pruning sweep", [&]() -> Outcome {
    const CommModules& sem = trained_at(trained, world, cfg, per, 0.0, train_seed);
    std::vector<double> rhos{0.0, 0.001, 0.01, 0.05, 0.1, 0.2}, conn, acc;
    std::string table;
    for (double rho : rhos) {
      const EvalMetrics m = eval_at(world, cfg, sem, Mode::semantic, per, 0.0, rho, eval_seed);
      conn.push_back(m.avg_connections());
      acc.push_back(m.accuracy());
      table += " rho=" + fmt("%g", rho) + ":" + fmt("%.3f", conn.back()) + "/" + fmt("%.4f", acc.back());
    }
    bool monotone = true;
    for (std::size_t k = 1; k < conn.size(); ++k) monotone = monotone && conn[k] <= conn[k - 1];
    const bool full = conn[0] == 15.0;
    const bool kept = std::abs(acc[1] - acc[0]) <= 0.01;
    const std::string reduction = conn[1] < conn[0] ? "reduced" : "equal (no entries below 0.001)";
    return {monotone && full && kept, "connections/accuracy" + table + "; rho=0.001 connections " + reduction};
  });

  run(8, "sweep determinism", [&]() -> Outcome {
    ExperimentCfg small = cfg;
    small.pipeline.train.epochs = 1;
    small.pipeline.train.batches_per_epoch = 3;
    small.sweep.splits = {1, 2};
    small.sweep.data_pers = {0.1};
    small.sweep.query_pers = {0.0, 0.1};
    small.sweep.rhos = {0.0, 0.05};
    small.sweep.modes = {Mode::semantic, Mode::naive, Mode::local};
    small.sweep.seeds = {1, 2};
    small.sweep.rounds = 20;
    const auto dir = std::filesystem::temp_directory_path() / "colinf_acceptance";
    std::filesystem::create_directories(dir);
    run_sweep(small, world, dir / "a.csv");
    run_sweep(small, world, dir / "b.csv");
    auto slurp = [](const std::filesystem::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    const std::string a = slurp(dir / "a.csv"), b = slurp(dir / "b.csv");
    const auto lines = std::count(a.begin(), a.end(), '\n');
    return {a == b && lines == 49, std::to_string(lines - 1) + " rows, reruns " + (a == b ? "byte-identical" : "DIFFER")};
  });

  run(9, "accounting identity", [&]() -> Outcome {
    std::size_t rounds = 0, mismatches = 0;
    for (std::size_t split = 0; split <= 5; ++split) {
      Rng init = make_stream(5, StreamKind::init, 1, split);
      const CommModules m = split == 2 ? trained_at(trained, world, cfg, per, 0.0, train_seed)
                                       : CommModules::build(world.backbone.dim(split), cfg.comm, init);
      for (double rho : {0.0, 0.01, 0.05, 0.1, 0.2}) {
        PipelineCfg p = cfg.pipeline;
        p.split = split;
        p.rho = rho;
        p.query.per = 0.1;
        for (std::uint64_t r = 0; r < 10; ++r, ++rounds) {
          const RoundState round = build_round(cfg.scenario, world.data.test, 99, r);
          const RoundMetrics rm = infer_round(round, world.backbone, m, p, 99);
          const Matrix& pr = rm.matching.pruned;
          std::size_t survivors = 0;
          for (Eigen::Index i = 0; i < pr.rows(); ++i)
            for (Eigen::Index j = 0; j < pr.cols(); ++j) survivors += i != j && pr(i, j) != 0.0;
          const std::size_t n = round.n_devices();
          const std::size_t dim = world.backbone.dim(split);
          if (rm.feature_tbs != survivors * ((dim + 39) / 40) || rm.query_tbs != n * (n - 1) * ((64 + 39) / 40))
            ++mismatches;
        }
      }
    }
    return {mismatches == 0, std::to_string(rounds) + " rounds over splits 0-5 and 5 thresholds, " +
                                 std::to_string(mismatches) + " mismatches"};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
