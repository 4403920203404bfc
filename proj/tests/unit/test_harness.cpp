#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "colinf/error.hpp"
#include "colinf/harness/config.hpp"
#include "colinf/harness/csv.hpp"
#include "colinf/harness/plot.hpp"
#include "colinf/harness/sweep.hpp"

using namespace colinf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("colinf_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A grid small enough to train in well under a second.
const char* kTinyCfg = R"(
seed = 3
[scenario]
n_devices = 4
n_groups = 2
image_side = 4
classes = 3
mean_contrast = 0.4
train_per_class = 20
val_per_class = 10
test_per_class = 10
[backbone]
hidden = [8]
epochs = 20
lr = 0.01
min_accuracy = 0
[comm]
query_size = 4
key_size = 6
hidden = [5]
[training]
batch = 4
epochs = 2
batches_per_epoch = 3
lr = 0.01
[sweep]
split = [0, 1]
data_per = [0, 0.3]
query_per = [0]
rho = [0, 0.2]
mode = [semantic, local]
seeds = [1, 2]
rounds = 5
)";

}  // namespace

TEST(Config, SectionsListsAndComments) {
  auto c = Config::parse("seed = 4  # master\n[sweep]\nrho = [0, 0.5 ,1]\n\n# note\nmode = [naive]\n");
  EXPECT_EQ(c.get_uint("seed", 0), 4u);
  EXPECT_EQ(c.get_doubles("sweep.rho", {}), (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(c.get_list("sweep.mode", {}), (std::vector<std::string>{"naive"}));
  EXPECT_EQ(c.get_double("missing", 2.5), 2.5);
}

TEST(Config, MalformedInputIsConfigError) {
  EXPECT_THROW(Config::parse("[broken\n"), ConfigError);
  EXPECT_THROW(Config::parse("just words\n"), ConfigError);
  EXPECT_THROW(Config::parse("x = 1").get_doubles("x", {}), ConfigError);
  EXPECT_THROW(Config::parse("x = abc").get_double("x", 0), ConfigError);
  EXPECT_THROW(Config::parse("x = -3").get_uint("x", 0), ConfigError);
  EXPECT_THROW(Config::load("/nonexistent/colinf.cfg"), IoError);
}

TEST(Config, ExperimentDefaultsAndOverrides) {
  ExperimentCfg d = experiment_from_config(Config::parse(""));
  EXPECT_EQ(d.scenario.n_devices, 16u);
  EXPECT_EQ(d.pipeline.data.tbs, 40u);
  EXPECT_EQ(d.pipeline.data.per, 0.1);
  EXPECT_EQ(d.pipeline.query.per, 0.0);
  EXPECT_EQ(d.backbone_widths(), (std::vector<std::size_t>{1024, 512, 256, 128, 64, 10}));

  auto e = experiment_from_config(Config::parse(kTinyCfg));
  EXPECT_EQ(e.seed, 3u);
  EXPECT_EQ(e.scenario.seed, 3u);
  EXPECT_EQ(e.sweep.cells(), 16u);
  EXPECT_EQ(e.sweep.modes[1], Mode::local);
  EXPECT_EQ(e.comm.hidden, (std::vector<std::size_t>{5}));
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
  EXPECT_THROW(experiment_from_config(Config::parse("[channel]\nper = 0.1\n")), ConfigError);
  EXPECT_THROW(experiment_from_config(Config::parse("[pipeline]\nmode = greedy\n")), ConfigError);
  EXPECT_THROW(experiment_from_config(Config::parse("[channel]\ndata_per = 1.5\n")), ConfigError);
  EXPECT_THROW(experiment_from_config(Config::parse("[scenario]\nn_groups = 5\n")), ConfigError);
  EXPECT_THROW(experiment_from_config(Config::parse("[sweep]\nsplit = [9]\n")), ConfigError);
  EXPECT_THROW(experiment_from_config(Config::parse("[sweep]\nrho = []\n")), ConfigError);
}

TEST(Csv, FormatAndReadBack) {
  const auto dir = scratch("csv");
  ResultRow ok;
  ok.split = 2;
  ok.data_per = 0.1;
  ok.rho = 0.001;
  ok.mode = Mode::noiseless;
  ok.seed = 7;
  ok.accuracy = 0.5;
  ok.avg_connections = 15;
  ok.query_tbs = 480;
  ok.feature_tbs = 1680;
  ResultRow bad = ok;
  bad.error = "training_error";
  EXPECT_EQ(format_row(ok), "2,0.1,0,0.001,noiseless,7,0.500000,15.000000,480.0000,1680.0000,nan");
  EXPECT_EQ(format_row(bad), "2,0.1,0,0.001,noiseless,7,nan,nan,nan,nan,error:training_error");

  const auto path = dir / "r.csv";
  std::ofstream(path) << kResultHeader << '\n' << format_row(ok) << '\n' << format_row(bad) << '\n';
  auto rows = read_results(path);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].mode, Mode::noiseless);
  EXPECT_DOUBLE_EQ(rows[0].avg_connections, 15.0);
  EXPECT_FALSE(rows[0].wall_time_s.has_value());
  EXPECT_TRUE(rows[1].failed());
  EXPECT_EQ(rows[1].error, "training_error");
}

TEST(Csv, StrictHeaderAndColumns) {
  const auto dir = scratch("csv_bad");
  std::ofstream(dir / "h.csv") << "split,accuracy\n1,0.5\n";
  EXPECT_THROW(read_results(dir / "h.csv"), ParseError);
  std::ofstream(dir / "c.csv") << kResultHeader << "\n2,0.1,0,0,semantic,1,abc,1,1,1,nan\n";
  try {
    read_results(dir / "c.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("accuracy"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_results(dir / "none.csv"), IoError);
}

TEST(Plot, EmptyCsvWritesNothing) {
  const auto dir = scratch("plot_empty");
  std::ofstream(dir / "e.csv") << kResultHeader << '\n';
  EXPECT_THROW(emit_plot(dir / "e.csv", PlotKind::split, dir), ParseError);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& f : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1u);
  EXPECT_THROW(parse_plot_kind("pie"), ConfigError);
}

TEST(Plot, RenderContainsSeriesAndAxes) {
  Chart c{"Accuracy vs split", "split", "accuracy", {{"semantic", {0, 1, 2}, {0.4, 0.5, 0.6}}, {"local", {0, 1, 2}, {0.3, 0.3, 0.3}}}};
  const std::string svg = render_svg(c);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("semantic"), std::string::npos);
  EXPECT_NE(svg.find("local"), std::string::npos);
  EXPECT_NE(svg.find("Accuracy vs split"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Plot, SingleRowIsSinglePointSeries) {
  const auto dir = scratch("plot_one");
  ResultRow r;
  r.split = 3;
  r.accuracy = 0.7;
  std::ofstream(dir / "one.csv") << kResultHeader << '\n' << format_row(r) << '\n';
  const auto files = emit_plot(dir / "one.csv", PlotKind::split, dir);
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0], dir / "one_split_accuracy.svg");
  const std::string svg = slurp(files[0]);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  auto charts = build_charts({r}, PlotKind::split);
  ASSERT_EQ(charts[0].series.size(), 1u);
  EXPECT_EQ(charts[0].series[0].x.size(), 1u);
}

TEST(Plot, ChartsAverageSeedsAndSkipFailures) {
  std::vector<ResultRow> rows(3);
  for (std::size_t i = 0; i < 3; ++i) {
    rows[i].split = 1;
    rows[i].seed = i;
    rows[i].accuracy = 0.2 * static_cast<double>(i + 1);
  }
  rows[2].error = "training_error";
  auto charts = build_charts(rows, PlotKind::split);
  ASSERT_EQ(charts.size(), 1u);
  ASSERT_EQ(charts[0].series.size(), 1u);
  EXPECT_NEAR(charts[0].series[0].y[0], 0.3, 1e-12);
  EXPECT_EQ(build_charts(rows, PlotKind::rho).size(), 2u);
}

TEST(Sweep, GridOrderAndByteIdenticalReruns) {
  const auto dir = scratch("sweep");
  ExperimentCfg cfg = experiment_from_config(Config::parse(kTinyCfg));
  World w = prepare_world(cfg);
  auto rows = run_sweep(cfg, w, dir / "a.csv");
  run_sweep(cfg, prepare_world(cfg), dir / "b.csv");
  ASSERT_EQ(rows.size(), 32u);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(rows[0].split, 0u);
  EXPECT_EQ(rows[1].seed, 2u);
  EXPECT_EQ(rows[2].mode, Mode::local);
  EXPECT_EQ(rows.back().split, 1u);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.failed());
    if (r.mode == Mode::local) EXPECT_EQ(r.avg_connections, 0.0);
    if (r.mode == Mode::semantic && r.rho == 0.0) EXPECT_EQ(r.avg_connections, 3.0);
  }
  EXPECT_EQ(read_results(dir / "a.csv").size(), 32u);
  const auto svgs = emit_plot(dir / "a.csv", PlotKind::rho, dir);
  ASSERT_EQ(svgs.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "a_rho_accuracy.svg"));
  EXPECT_TRUE(fs::exists(dir / "a_rho_connections.svg"));
}

TEST(Sweep, FailingCellBecomesErrorRow) {
  const auto dir = scratch("sweep_err");
  ExperimentCfg cfg = experiment_from_config(Config::parse(kTinyCfg));
  cfg.pipeline.train.lr = 1e300;
  cfg.sweep.splits = {1};
  cfg.sweep.data_pers = {0};
  cfg.sweep.rhos = {0};
  cfg.sweep.seeds = {1};
  auto rows = run_sweep(cfg, prepare_world(cfg), dir / "e.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].error, "training_error");
  EXPECT_FALSE(rows[1].failed());
  const std::string text = slurp(dir / "e.csv");
  EXPECT_NE(text.find("error:training_error"), std::string::npos);
}

TEST(Sweep, UnwritableOutputIsIoError) {
  ExperimentCfg cfg = experiment_from_config(Config::parse(kTinyCfg));
  EXPECT_THROW(run_sweep(cfg, prepare_world(cfg), "/nonexistent/dir/out.csv"), IoError);
}

TEST(Sweep, BackboneIsReusedFromCheckpoint) {
  const auto dir = scratch("world");
  ExperimentCfg cfg = experiment_from_config(Config::parse(kTinyCfg));
  World a = prepare_world(cfg, dir / "bb.ckpt");
  ASSERT_TRUE(fs::exists(dir / "bb.ckpt"));
  World b = prepare_world(cfg, dir / "bb.ckpt");
  EXPECT_TRUE(bit_equal(a.backbone.params(), b.backbone.params()));
  cfg.backbone_hidden = {9};
  EXPECT_THROW(prepare_world(cfg, dir / "bb.ckpt"), ConfigError);
}

TEST(Config, ShippedConfigsParse) {
  const fs::path dir = fs::path(COLINF_SOURCE_DIR) / "configs";
  const ExperimentCfg builtin;
  const ExperimentCfg d = experiment_from_config(Config::load(dir / "defaults.cfg"));
  EXPECT_EQ(d.scenario.mean_contrast, builtin.scenario.mean_contrast);
  EXPECT_EQ(d.scenario.train_per_class, builtin.scenario.train_per_class);
  EXPECT_EQ(d.pretrain.lr, builtin.pretrain.lr);
  EXPECT_EQ(d.pretrain.epochs, builtin.pretrain.epochs);
  EXPECT_EQ(d.pipeline.train.lr, builtin.pipeline.train.lr);
  EXPECT_EQ(d.pipeline.train.epochs, builtin.pipeline.train.epochs);
  EXPECT_EQ(d.pipeline.data.per, builtin.pipeline.data.per);
  EXPECT_EQ(d.comm.hidden, builtin.comm.hidden);
  EXPECT_EQ(d.backbone_hidden, builtin.backbone_hidden);
  EXPECT_EQ(d.eval_rounds, builtin.eval_rounds);

  EXPECT_EQ(experiment_from_config(Config::load(dir / "fig2.cfg")).sweep.cells(), 24u);
  EXPECT_EQ(experiment_from_config(Config::load(dir / "fig3.cfg")).sweep.cells(), 9u);
  const auto f4 = experiment_from_config(Config::load(dir / "fig4.cfg"));
  EXPECT_EQ(f4.sweep.rhos, (std::vector<double>{0, 0.001, 0.01, 0.05, 0.1, 0.2}));
  EXPECT_EQ(f4.sweep.plots, (std::vector<std::string>{"rho"}));
}
