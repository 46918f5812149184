// dtd: command-line front end for the decentralized TD simulator.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dtd/dtd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

fs::path resolve_output_dir(const fs::path& from_config, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DTD_OUTPUT_DIR"); env && *env) return env;
  return from_config;
}

void print_warnings(const dtd::TrialsResult& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_gen(std::uint64_t seed, const dtd::SyntheticSpec& spec, const fs::path& out) {
  dtd::Rng rng(seed);
  auto inst = dtd::gen_synthetic(spec, rng);
  inst.mdp.seed = seed;
  dtd::save_instance(inst, out);
  std::cout << out.string() << '\n';
  return 0;
}

int cmd_run(const fs::path& config, const std::string& out_flag, std::size_t threads, bool require_sweep) {
  auto cfg = dtd::load_config(config);
  if (require_sweep && !cfg.sweep) throw dtd::ConfigError("sweep: the config has no sweep section");
  if (threads > 0) cfg.threads = threads;
  const auto dir = resolve_output_dir(cfg.output_dir, out_flag);
  const auto result = dtd::run_trials(cfg);
  print_warnings(result);
  for (const auto& p : dtd::write_results(result, dir)) std::cout << p.string() << '\n';
  return 0;
}

int cmd_fixed_point(const fs::path& instance) {
  const auto inst = dtd::load_instance(instance);
  const auto chain = dtd::induced_chain(inst.mdp, inst.policy);
  const auto fp = dtd::compute_fixed_point(chain, inst.features);
  json out{{"d", to_json(fp.d)},
           {"J_pi", fp.J_pi},
           {"psi", to_json(fp.psi)},
           {"b", to_json(fp.b)},
           {"w_star", to_json(fp.w_star)},
           {"stationarity_residual", fp.stationarity_residual(chain.transition)},
           {"fixed_point_residual", fp.fixed_point_residual()},
           {"psi_symmetric_max_eigenvalue", fp.psi_symmetric_max_eigenvalue()}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_bound(const fs::path& instance, double beta, std::size_t K, std::size_t L, double q00,
              std::size_t horizon) {
  const auto inst = dtd::load_instance(instance);
  const auto N = inst.mdp.num_agents();
  dtd::ConsensusBoundInput in{N, inst.consensus.eta, beta, K, L, inst.mdp.r_max(), q00};
  const auto bound = dtd::consensus_error_bound(in);
  const auto chain = dtd::induced_chain(inst.mdp, inst.policy);
  const auto fp = dtd::compute_fixed_point(chain, inst.features);
  const auto tc = dtd::theoretical_constants(chain, inst.features, fp, inst.mdp.r_max(), inst.consensus.eta, N,
                                             beta, K, horizon);
  json out{{"N", N},
           {"eta", inst.consensus.eta},
           {"beta", beta},
           {"K", K},
           {"L", L},
           {"r_max", inst.mdp.r_max()},
           {"q00_norm", q00},
           {"kappa1", bound.kappa1},
           {"kappa2", bound.kappa2},
           {"rho", bound.rho},
           {"transient", bound.transient},
           {"floor", bound.floor},
           {"bound", bound.value},
           {"lyapunov",
            {{"residual", tc.lyapunov.residual},
             {"lambda_max", tc.lyapunov.lambda_max},
             {"lambda_min", tc.lyapunov.lambda_min},
             {"c1", tc.lyapunov.c1},
             {"c2", tc.lyapunov.c2},
             {"c3", tc.lyapunov.c3}}},
           {"mixing_time", {{"tau", tc.tau.tau}, {"capped", tc.tau.capped}}}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& x, const std::string& y, bool log_y,
             double floor, const std::string& title, const std::vector<std::string>& labels, const fs::path& out) {
  dtd::PlotAxes axes;
  axes.x = dtd::x_axis_from_string(x);
  axes.y = dtd::metric_from_string(y);
  axes.log_y = log_y;
  axes.log_floor = floor;
  axes.title = title;
  std::vector<fs::path> paths(csvs.begin(), csvs.end());
  dtd::render_plot(paths, axes, out, labels);
  std::cout << out.string() << '\n';
  return 0;
}

int cmd_validate(const fs::path& instance) {
  const auto inst = dtd::load_instance(instance);
  const auto chain = dtd::induced_chain(inst.mdp, inst.policy);
  const auto ergodic = dtd::check_ergodic(chain.transition);
  const auto features = dtd::validate_features(inst.features);
  const auto consensus = dtd::validate_consensus(inst.consensus.weights);
  const bool connected = inst.graph.is_connected();
  json feature_issues = json::array();
  for (const auto& f : features.failures) feature_issues.push_back(f.message);
  json out{{"ergodic", {{"irreducible", ergodic.irreducible}, {"aperiodic", ergodic.aperiodic}}},
           {"bounded_rewards", {{"r_max", inst.mdp.r_max()}, {"ok", true}}},
           {"consensus",
            {{"doubly_stochastic", consensus.is_doubly_stochastic},
             {"nonnegative", consensus.nonnegative},
             {"positive_diagonal", consensus.positive_diagonal},
             {"connected", connected},
             {"eta", consensus.eta},
             {"second_largest_singular_value", consensus.second_largest_singular_value}}},
           {"features", {{"ok", features.ok()}, {"issues", feature_issues}}}};
  bool ok = ergodic.ok() && features.ok() && consensus.satisfies_weight_assumption() && connected;
  if (ergodic.ok() && features.ok()) {
    const auto fp = dtd::compute_fixed_point(chain, inst.features);
    const double lmax = fp.psi_symmetric_max_eigenvalue();
    out["psi_negative_definite"] = {{"max_symmetric_eigenvalue", lmax}, {"ok", lmax < 0.0}};
    ok = ok && lmax < 0.0;
  }
  out["ok"] = ok;
  std::cout << out.dump(2) << '\n';
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized average-reward TD learning with local steps"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "Write a seeded synthetic instance as JSON");
  std::uint64_t gen_seed = 0;
  dtd::SyntheticSpec spec;
  std::string gen_graph = "ring", gen_weights = "circulant", gen_out = "instance.json";
  gen->add_option("--seed", gen_seed, "Instance seed")->required();
  gen->add_option("--agents", spec.num_agents, "Number of agents")->capture_default_str();
  gen->add_option("--states", spec.num_states, "Number of states")->capture_default_str();
  gen->add_option("--features", spec.feature_dim, "Feature dimension")->capture_default_str();
  gen->add_option("--actions", spec.actions_per_agent, "Actions per agent")->capture_default_str();
  gen->add_option("--noise", spec.noise_half_width, "Reward noise half-width")->capture_default_str();
  gen->add_option("--graph", gen_graph, "ring | k_regular | erdos_renyi | complete")->capture_default_str();
  gen->add_option("--k", spec.topology.graph.k, "Degree for k_regular")->capture_default_str();
  gen->add_option("--p", spec.topology.graph.p, "Edge probability for erdos_renyi")->capture_default_str();
  gen->add_option("--weights", gen_weights, "circulant | metropolis | uniform_average")->capture_default_str();
  gen->add_option("-o,--out", gen_out, "Output JSON path")->capture_default_str();

  auto* run = app.add_subcommand("run", "Run every algorithm of a config over all trials");
  auto* sweep = app.add_subcommand("sweep", "Run the (K, M) grid of a config's sweep section");
  std::string config_path, out_dir;
  std::size_t threads = 0;
  for (auto* sub : {run, sweep}) {
    sub->add_option("config", config_path, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--output-dir", out_dir, "Override the output directory");
    sub->add_option("--threads", threads, "Worker threads (0: config / hardware)");
  }

  auto* fixed = app.add_subcommand("fixed-point", "Print d, J, Psi, b and w* of an instance");
  std::string instance_path;
  fixed->add_option("instance", instance_path, "Instance JSON")->required();

  auto* bound = app.add_subcommand("bound", "Print the consensus-error bound and theory constants");
  double beta = 0.005, q00 = 0.0;
  std::size_t K = 50, L = 200, horizon = dtd::kDefaultMixingHorizon;
  bound->add_option("instance", instance_path, "Instance JSON")->required();
  bound->add_option("--beta", beta, "Step size")->capture_default_str();
  bound->add_option("--K", K, "Local steps per round")->capture_default_str();
  bound->add_option("--L", L, "Communication rounds")->capture_default_str();
  bound->add_option("--q00", q00, "Spectral norm of the initial deviation")->capture_default_str();
  bound->add_option("--horizon", horizon, "Mixing-time search cap")->capture_default_str();

  auto* plot = app.add_subcommand("plot", "Render CSV results as an SVG line chart");
  std::vector<std::string> csvs, labels;
  std::string x_axis = "comm_round", y_metric = "objective_error", title, plot_out = "plot.svg";
  bool log_y = false;
  double floor = 1e-12;
  plot->add_option("csv", csvs, "Result CSVs")->required();
  plot->add_option("--x", x_axis, "comm_round | samples")->capture_default_str();
  plot->add_option("--y", y_metric, "objective_error | msbe | consensus_error | q_norm")->capture_default_str();
  plot->add_flag("--log-y", log_y, "Logarithmic y axis");
  plot->add_option("--floor", floor, "Clamp for non-positive values on a log axis")->capture_default_str();
  plot->add_option("--title", title, "Chart title");
  plot->add_option("--label", labels, "Legend label per CSV (default: file stem)");
  plot->add_option("-o,--out", plot_out, "Output SVG path")->capture_default_str();

  auto* val = app.add_subcommand("validate", "Check an instance against the modelling assumptions");
  val->add_option("instance", instance_path, "Instance JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      spec.topology.graph.kind = dtd::graph_kind_from_string(gen_graph);
      spec.topology.consensus.scheme = dtd::consensus_scheme_from_string(gen_weights);
      return cmd_gen(gen_seed, spec, gen_out);
    }
    if (*run) return cmd_run(config_path, out_dir, threads, false);
    if (*sweep) return cmd_run(config_path, out_dir, threads, true);
    if (*fixed) return cmd_fixed_point(instance_path);
    if (*bound) return cmd_bound(instance_path, beta, K, L, q00, horizon);
    if (*plot) return cmd_plot(csvs, x_axis, y_metric, log_y, floor, title, labels, plot_out);
    if (*val) return cmd_validate(instance_path);
  } catch (const dtd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
