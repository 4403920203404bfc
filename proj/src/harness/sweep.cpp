#include "colinf/harness/sweep.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <tuple>

#include "colinf/error.hpp"
#include "colinf/pipeline.hpp"

namespace colinf {

World prepare_world(const ExperimentCfg& cfg, const std::optional<std::filesystem::path>& backbone_path,
                    std::ostream* log) {
  World w{gen_dataset(cfg.scenario), {}};
  if (backbone_path && std::filesystem::exists(*backbone_path)) {
    w.backbone = load_backbone(*backbone_path);
    if (w.backbone.split_table() != SplitModel::build(cfg.backbone_widths(), cfg.seed).split_table())
      throw ConfigError(backbone_path->string() + ": checkpoint architecture does not match the config");
    if (log) *log << "loaded backbone " << backbone_path->string() << "\n";
    return w;
  }
  PretrainReport rep;
  w.backbone = pretrain(SplitModel::build(cfg.backbone_widths(), cfg.seed), w.data.train, w.data.val,
                        cfg.pretrain, &rep);
  if (log) *log << "pretrained backbone: clean held-out accuracy " << rep.val_accuracy << "\n";
  if (backbone_path) save_backbone(*backbone_path, w.backbone);
  return w;
}

std::uint64_t cell_seed(std::uint64_t master, std::uint64_t grid_seed) {
  return derive_seed(master, StreamKind::batch, 0x5eed, grid_seed);
}

namespace {

// Everything training depends on; rho is applied at evaluation time only.
using TrainKey = std::tuple<std::size_t, double, double, std::uint64_t>;

}  // namespace

std::vector<ResultRow> run_sweep(const ExperimentCfg& cfg, const World& world, const std::filesystem::path& csv,
                                 std::ostream* log) {
  cfg.sweep.validate();
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw IoError("cannot write sweep output " + csv.string());
  out << kResultHeader << '\n';
  out.flush();

  std::map<TrainKey, CommModules> trained;
  std::vector<ResultRow> rows;
  const auto& sw = cfg.sweep;
  for (auto split : sw.splits)
    for (auto data_per : sw.data_pers)
      for (auto query_per : sw.query_pers)
        for (auto rho : sw.rhos)
          for (auto mode : sw.modes)
            for (auto seed : sw.seeds) {
              ResultRow row;
              row.split = split;
              row.data_per = data_per;
              row.query_per = query_per;
              row.rho = rho;
              row.mode = mode;
              row.seed = seed;
              const auto start = std::chrono::steady_clock::now();
              try {
                PipelineCfg p = cfg.pipeline;
                p.split = split;
                p.data.per = data_per;
                p.query.per = query_per;
                p.rho = rho;
                p.mode = mode;
                p.validate();
                const std::uint64_t s = cell_seed(cfg.seed, seed);

                CommModules none;
                const CommModules* modules = &none;
                if (mode == Mode::semantic || mode == Mode::noiseless) {
                  const TrainKey key{split, p.effective_data().per, p.effective_query().per, seed};
                  auto it = trained.find(key);
                  if (it == trained.end()) {
                    PipelineCfg tp = p;
                    tp.rho = 0.0;
                    TrainReport rep;
                    auto m = train_comm(world.backbone, tp, cfg.scenario, world.data.train, s, cfg.comm, &rep);
                    if (log)
                      *log << "trained split=" << split << " data_per=" << std::get<1>(key)
                           << " query_per=" << std::get<2>(key) << " seed=" << seed << " final loss "
                           << (rep.epoch_loss.empty() ? 0.0 : rep.epoch_loss.back()) << "\n";
                    it = trained.emplace(key, std::move(m)).first;
                  }
                  modules = &it->second;
                }
                const EvalMetrics m =
                    evaluate(world.backbone, *modules, p, cfg.scenario, world.data.test, sw.rounds, s);
                row.accuracy = m.accuracy();
                row.avg_connections = m.avg_connections();
                row.query_tbs = m.query_tbs_per_round();
                row.feature_tbs = m.feature_tbs_per_round();
                if (sw.record_wall_time)
                  row.wall_time_s =
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
              } catch (const Error& e) {
                row.error = to_string(e.kind());
                if (log) *log << "cell failed: " << e.what() << "\n";
              }
              out << format_row(row) << '\n';
              out.flush();
              if (!out) throw IoError("failed while writing " + csv.string());
              if (log) *log << format_row(row) << "\n";
              rows.push_back(std::move(row));
            }
  return rows;
}

}  // namespace colinf
