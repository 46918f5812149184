#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace dtd;
using dtd::testing::default_instance;

namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<MetricsRow> sample_rows() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {{-1, 1, 50, 0.125, 1.0 / 3.0, 2e-17, 0.0}, {-1, 2, 100, nan, 0.1, 1e300, 5.5}};
}

}  // namespace

TEST(Csv, RoundTripIsExact) {
  const auto rows = sample_rows();
  std::stringstream buf;
  write_csv(rows, buf);
  const auto back = read_csv(buf);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].trial, rows[i].trial);
    EXPECT_EQ(back[i].comm_round, rows[i].comm_round);
    EXPECT_EQ(back[i].samples, rows[i].samples);
    EXPECT_EQ(back[i].msbe, rows[i].msbe);
    EXPECT_EQ(back[i].consensus_error, rows[i].consensus_error);
    EXPECT_EQ(back[i].q_norm, rows[i].q_norm);
  }
  EXPECT_EQ(back[0].objective_error, 0.125);
  EXPECT_TRUE(std::isnan(back[1].objective_error));
}

TEST(Csv, HeaderOnlyAndLineCounts) {
  std::stringstream empty;
  write_csv({}, empty);
  EXPECT_EQ(empty.str(), std::string(kCsvHeader) + "\n");
  EXPECT_TRUE(read_csv(empty).empty());
  std::stringstream one;
  write_csv({sample_rows()[0]}, one);
  EXPECT_EQ(count(one.str(), "\n"), 2u);
}

TEST(Csv, UnselectedMetricIsEmptyField) {
  EXPECT_EQ(csv_line(sample_rows()[1]).substr(0, 10), "-1,2,100,,");
}

TEST(Csv, RejectsMalformedInput) {
  std::stringstream bad_header("trial,round\n");
  EXPECT_THROW(read_csv(bad_header), IoError);
  std::stringstream short_row(std::string(kCsvHeader) + "\n0,1,2,3\n");
  EXPECT_THROW(read_csv(short_row), IoError);
  std::stringstream negative(std::string(kCsvHeader) + "\n0,-1,2,3,4,5,6\n");
  EXPECT_THROW(read_csv(negative), IoError);
  EXPECT_THROW(read_csv(fs::path("/nonexistent/dir/x.csv")), IoError);
}

TEST(Csv, WriteCreatesParentDirectories) {
  const auto dir = fs::temp_directory_path() / "dtd_test_csv";
  fs::remove_all(dir);
  write_csv(sample_rows(), dir / "a" / "b.csv");
  EXPECT_EQ(read_csv(dir / "a" / "b.csv").size(), 2u);
  fs::remove_all(dir);
}

TEST(Svg, DeterministicWithOnePolylinePerSeries) {
  PlotAxes axes;
  axes.y = Metric::msbe;
  const auto s = series_from_rows(sample_rows(), axes, "run");
  ASSERT_EQ(s.x.size(), 2u);
  const auto a = render_svg({s}, axes), b = render_svg({s}, axes);
  EXPECT_EQ(a, b);
  EXPECT_EQ(count(a, "<polyline"), 1u);
  EXPECT_NE(a.find(">run</text>"), std::string::npos);
  EXPECT_EQ(count(render_svg({s, s, s}, axes), "<polyline"), 3u);
}

TEST(Svg, SkipsMissingValues) {
  PlotAxes axes;
  axes.y = Metric::objective_error;
  const auto s = series_from_rows(sample_rows(), axes, "run");
  EXPECT_EQ(s.x.size(), 1u);
}

TEST(Svg, LogAxisClampsNonPositiveValues) {
  PlotAxes axes;
  axes.y = Metric::q_norm;
  axes.log_y = true;
  const auto s = series_from_rows(sample_rows(), axes, "run");
  EXPECT_NE(render_svg({s}, axes).find("clamped to the floor"), std::string::npos);
  axes.y = Metric::msbe;
  EXPECT_EQ(render_svg({series_from_rows(sample_rows(), axes, "run")}, axes).find("clamped"), std::string::npos);
}

TEST(Svg, AveragesTrialsWithoutMeanRows) {
  std::vector<MetricsRow> rows{{0, 1, 10, 1.0, 1, 1, 1}, {1, 1, 10, 3.0, 1, 1, 1}};
  PlotAxes axes;
  axes.x = XAxis::samples;
  const auto s = series_from_rows(rows, axes, "t");
  ASSERT_EQ(s.y.size(), 1u);
  EXPECT_DOUBLE_EQ(s.x[0], 10.0);
  EXPECT_DOUBLE_EQ(s.y[0], 2.0);
}

TEST(Svg, RenderPlotValidatesArguments) {
  PlotAxes axes;
  EXPECT_THROW(render_plot({}, axes, "x.svg"), ConfigError);
  EXPECT_THROW(render_plot({"a.csv"}, axes, "x.svg", {"a", "b"}), ConfigError);
  EXPECT_THROW(x_axis_from_string("time"), ConfigError);
}

TEST(Config, ParsesPresetFiles) {
  for (const auto& entry : fs::directory_iterator(DTD_CONFIG_DIR)) {
    if (entry.path().extension() != ".yaml") continue;
    SCOPED_TRACE(entry.path().string());
    const auto cfg = load_config(entry.path());
    EXPECT_FALSE(cfg.algorithms.empty());
    for (const auto& a : cfg.algorithms) EXPECT_EQ(a.samples(), a.period() * a.L);
  }
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(parse_config("name: x\nmodel: {kind: synthetic}\nalgorithms: [{kind: local}]\nbogus: 1\n"),
               ConfigError);
  EXPECT_THROW(parse_config("name: x\nmodel: {kind: synthetic, grid: 5}\nalgorithms: [{kind: local}]\n"),
               ConfigError);
  EXPECT_THROW(parse_config("name: x\nmodel: {kind: synthetic}\nalgorithms: [{kind: local, gamma: 1}]\n"),
               ConfigError);
  EXPECT_THROW(parse_config("name: x\nmodel: {kind: synthetic}\ntopology: {graph: ring, q: 1}\n"
                            "algorithms: [{kind: local}]\n"),
               ConfigError);
}

TEST(Config, RejectsInvalidValues) {
  const std::string head = "name: x\nmodel: {kind: synthetic}\nalgorithms:\n";
  EXPECT_THROW(parse_config(head + "  - {kind: vanilla, K: 5}\n"), ConfigError);
  EXPECT_THROW(parse_config(head + "  - {kind: local, beta: 0}\n"), ConfigError);
  EXPECT_THROW(parse_config(head + "  - {kind: local, K: 0}\n"), ConfigError);
  EXPECT_THROW(parse_config(head + "  - {kind: local}\n  - {kind: local}\n"), ConfigError);
  EXPECT_THROW(parse_config(head + "  - {kind: local, name: comparison}\n"), ConfigError);
  EXPECT_THROW(parse_config(head + "  - {kind: sarsa}\n"), ConfigError);
  EXPECT_THROW(parse_config("name: x\nmodel: {kind: synthetic}\n"), ConfigError);
  EXPECT_THROW(parse_config("name: [unclosed\n"), ConfigError);
}

TEST(Config, SweepExpansion) {
  const auto cfg = parse_config(
      "name: s\nmodel: {kind: synthetic}\nsweep: {samples: 1000, K: [10, 50], M: [20], batching_beta: 0.2}\n");
  ASSERT_EQ(cfg.algorithms.size(), 3u);
  EXPECT_EQ(cfg.algorithms[0].name, "local_K10");
  EXPECT_EQ(cfg.algorithms[0].L, 100u);
  EXPECT_EQ(cfg.algorithms[1].L, 20u);
  EXPECT_EQ(cfg.algorithms[2].name, "batching_M20");
  EXPECT_EQ(cfg.algorithms[2].kind, Algorithm::batching);
  EXPECT_EQ(cfg.algorithms[2].M, 20u);
  EXPECT_EQ(cfg.algorithms[2].L, 50u);
  EXPECT_DOUBLE_EQ(cfg.algorithms[2].beta, 0.2);
  EXPECT_THROW(parse_config("name: s\nmodel: {kind: synthetic}\nsweep: {samples: 1000, K: [300]}\n"), ConfigError);
}

TEST(Config, DefaultsFollowModel) {
  const auto nav = parse_config("name: n\nmetrics: [msbe]\nmodel: {kind: navigation}\nalgorithms: [{kind: local}]\n");
  EXPECT_EQ(nav.topology.graph.kind, GraphKind::erdos_renyi);
  EXPECT_EQ(nav.topology.consensus.scheme, ConsensusScheme::metropolis);
  const auto syn = parse_config("name: s\nmodel: {kind: synthetic}\nalgorithms: [{kind: local}]\n");
  EXPECT_EQ(syn.topology.graph.kind, GraphKind::ring);
  EXPECT_EQ(syn.synthetic.num_agents, 20u);
  EXPECT_EQ(syn.trials, 10u);
}

TEST(InstanceJson, RoundTripIsExact) {
  const auto inst = default_instance(42);
  const auto back = instance_from_json(nlohmann::json::parse(instance_to_json(inst).dump()));
  EXPECT_EQ(back.mdp.transition(), inst.mdp.transition());
  EXPECT_EQ(back.mdp.rewards(), inst.mdp.rewards());
  EXPECT_EQ(back.mdp.actions_per_agent(), inst.mdp.actions_per_agent());
  EXPECT_EQ(back.mdp.noise_half_width(), inst.mdp.noise_half_width());
  EXPECT_EQ(back.mdp.r_max(), inst.mdp.r_max());
  EXPECT_EQ(back.mdp.seed, inst.mdp.seed);
  EXPECT_EQ(back.features.matrix(), inst.features.matrix());
  EXPECT_EQ(back.graph.edges(), inst.graph.edges());
  EXPECT_EQ(back.consensus.weights, inst.consensus.weights);
  EXPECT_EQ(back.consensus.eta, inst.consensus.eta);
  const auto fa = compute_fixed_point(induced_chain(inst.mdp, inst.policy), inst.features);
  const auto fb = compute_fixed_point(induced_chain(back.mdp, back.policy), back.features);
  EXPECT_EQ(fa.w_star, fb.w_star);
}

TEST(InstanceJson, FileRoundTripAndErrors) {
  const auto dir = fs::temp_directory_path() / "dtd_test_instance";
  fs::remove_all(dir);
  const auto path = dir / "inst.json";
  save_instance(default_instance(1), path);
  EXPECT_EQ(load_instance(path).mdp.transition(), default_instance(1).mdp.transition());
  {
    std::ofstream out(dir / "bad.json");
    out << "{\"format\": \"dtd-instance\", \"version\": 1}";
  }
  EXPECT_THROW(load_instance(dir / "bad.json"), ConfigError);
  {
    std::ofstream out(dir / "garbage.json");
    out << "not json";
  }
  EXPECT_THROW(load_instance(dir / "garbage.json"), ConfigError);
  EXPECT_THROW(load_instance(dir / "missing.json"), IoError);
  fs::remove_all(dir);
}
