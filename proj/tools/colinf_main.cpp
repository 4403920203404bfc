// colinf: command line front end for the collaborative inference simulator.
//
//   colinf pretrain --config defaults.cfg --out run/
//   colinf train    --config defaults.cfg --out run/
//   colinf eval     --config defaults.cfg --out run/
//   colinf sweep    --config fig4.cfg --seed 7 --out results/
//   colinf plot     --csv results/fig4.csv --kind rho --out results/
//
// Errors are reported on stderr as one line:
//   error kind=<kind> message="<text>"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "colinf/error.hpp"
#include "colinf/harness/config.hpp"
#include "colinf/harness/csv.hpp"
#include "colinf/harness/plot.hpp"
#include "colinf/harness/sweep.hpp"

namespace fs = std::filesystem;
using namespace colinf;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

std::string quote(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '"' || c == '\\') o += '\\';
    o += c == '\n' ? ' ' : c;
  }
  return o;
}

void report(const std::string& kind, const std::string& message) {
  std::cerr << "error kind=" << kind << " message=\"" << quote(message) << "\"\n";
}

ExperimentCfg load_experiment(const Globals& g) {
  Config c;
  if (!g.config.empty()) c = Config::load(g.config);
  if (g.seed) c.set("seed", std::to_string(*g.seed));
  return experiment_from_config(c);
}

fs::path out_dir(const Globals& g) {
  fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

CommModules trained_modules(const ExperimentCfg& cfg, const World& world, const fs::path& dir) {
  const auto path = dir / "comm.ckpt";
  if (fs::exists(path)) {
    CommModules m = load_comm(path);
    if (m.feature_dim() == world.backbone.dim(cfg.pipeline.split)) return m;
    std::clog << "ignoring " << path.string() << ": trained for another split\n";
  }
  TrainReport rep;
  CommModules m = train_comm(world.backbone, cfg.pipeline, cfg.scenario, world.data.train, cfg.seed, cfg.comm, &rep);
  if (!rep.epoch_loss.empty()) std::clog << "final training loss " << rep.epoch_loss.back() << "\n";
  save_comm(path, m, cfg.seed);
  return m;
}

int run_pretrain(const Globals& g) {
  const auto cfg = load_experiment(g);
  const auto dir = out_dir(g);
  const auto path = dir / "backbone.ckpt";
  fs::remove(path);
  World w = prepare_world(cfg, path, &std::clog);
  std::cout << "backbone=" << path.string() << " clean_test_accuracy=" << accuracy(w.backbone, w.data.test) << "\n";
  return 0;
}

int run_train(const Globals& g) {
  const auto cfg = load_experiment(g);
  const auto dir = out_dir(g);
  World w = prepare_world(cfg, dir / "backbone.ckpt", &std::clog);
  fs::remove(dir / "comm.ckpt");
  trained_modules(cfg, w, dir);
  std::cout << "comm=" << (dir / "comm.ckpt").string() << "\n";
  return 0;
}

int run_eval(const Globals& g) {
  const auto cfg = load_experiment(g);
  const auto dir = out_dir(g);
  World w = prepare_world(cfg, dir / "backbone.ckpt", &std::clog);
  CommModules m;
  if (cfg.pipeline.mode == Mode::semantic || cfg.pipeline.mode == Mode::noiseless) m = trained_modules(cfg, w, dir);
  const EvalMetrics em = evaluate(w.backbone, m, cfg.pipeline, cfg.scenario, w.data.test, cfg.eval_rounds, cfg.seed);
  ResultRow row;
  row.split = cfg.pipeline.split;
  row.data_per = cfg.pipeline.data.per;
  row.query_per = cfg.pipeline.query.per;
  row.rho = cfg.pipeline.rho;
  row.mode = cfg.pipeline.mode;
  row.seed = cfg.seed;
  row.accuracy = em.accuracy();
  row.avg_connections = em.avg_connections();
  row.query_tbs = em.query_tbs_per_round();
  row.feature_tbs = em.feature_tbs_per_round();
  std::ofstream out(dir / "eval.csv", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "eval.csv").string());
  out << kResultHeader << '\n' << format_row(row) << '\n';
  std::cout << "mode=" << to_string(row.mode) << " accuracy=" << row.accuracy
            << " avg_connections=" << row.avg_connections << " query_tbs_per_round=" << row.query_tbs
            << " feature_tbs_per_round=" << row.feature_tbs << " rounds=" << em.rounds << "\n";
  return 0;
}

int run_sweep_cmd(const Globals& g) {
  const auto cfg = load_experiment(g);
  const auto dir = out_dir(g);
  World w = prepare_world(cfg, std::nullopt, &std::clog);
  const auto csv = dir / cfg.sweep.output;
  run_sweep(cfg, w, csv, &std::clog);
  std::cout << "csv=" << csv.string() << "\n";
  for (const auto& k : cfg.sweep.plots)
    for (const auto& p : emit_plot(csv, parse_plot_kind(k), dir)) std::cout << "plot=" << p.string() << "\n";
  return 0;
}

int run_plot(const Globals& g, const std::string& csv, const std::string& kind) {
  const auto dir = out_dir(g);
  for (const auto& p : emit_plot(csv, parse_plot_kind(kind), dir)) std::cout << "plot=" << p.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative edge inference simulator", "colinf"};
  Globals g;
  app.add_option("--config", g.config, "Experiment config file");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.require_subcommand(1, 1);

  auto* pretrain_cmd = app.add_subcommand("pretrain", "Pretrain and save the backbone")->fallthrough();
  auto* train_cmd = app.add_subcommand("train", "Train the query/key/attention modules")->fallthrough();
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate the configured mode")->fallthrough();
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the configured grid and write CSV and plots")->fallthrough();
  auto* plot_cmd = app.add_subcommand("plot", "Render charts from a results CSV")->fallthrough();
  std::string csv, kind;
  plot_cmd->add_option("--csv", csv, "Results CSV")->required();
  plot_cmd->add_option("--kind", kind, "split, per or rho")->required()->check(CLI::IsMember({"split", "per", "rho"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    report("usage_error", e.what());
    return 2;
  }

  try {
    if (*pretrain_cmd) return run_pretrain(g);
    if (*train_cmd) return run_train(g);
    if (*eval_cmd) return run_eval(g);
    if (*sweep_cmd) return run_sweep_cmd(g);
    if (*plot_cmd) return run_plot(g, csv, kind);
  } catch (const Error& e) {
    report(to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    report("internal_error", e.what());
    return 1;
  }
  return 1;
}
