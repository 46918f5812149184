// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace dtd;
using dtd::testing::default_instance;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

ExperimentConfig preset(const std::string& name) { return load_config(fs::path(DTD_CONFIG_DIR) / (name + ".yaml")); }

const AlgorithmResult& by_kind(const TrialsResult& r, Algorithm kind) {
  for (const auto& a : r.algorithms) {
    if (a.config.kind == kind) return a;
  }
  throw ConfigError(std::string("no algorithm of kind ") + to_string(kind));
}

double metric_at(const AlgorithmResult& a, std::size_t round, Metric m) {
  return metric_value(a.mean.at(round - 1), m);
}

/// Means over consecutive non-overlapping windows of `width` rounds.
std::vector<double> block_means(const std::vector<MetricsRow>& rows, Metric m, std::size_t width) {
  std::vector<double> out;
  for (std::size_t start = 0; start + width <= rows.size(); start += width) {
    double s = 0.0;
    for (std::size_t i = start; i < start + width; ++i) s += metric_value(rows[i], m);
    out.push_back(s / static_cast<double>(width));
  }
  return out;
}

std::size_t increases(const std::vector<double>& v) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < v.size(); ++i) n += v[i] > v[i - 1];
  return n;
}

Verdict fixed_point_exactness() {
  double worst_fp = 0.0, worst_ss = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = default_instance(seed);
    const auto chain = induced_chain(inst.mdp, inst.policy);
    const auto fp = compute_fixed_point(chain, inst.features);
    worst_fp = std::max(worst_fp, fp.fixed_point_residual());
    worst_ss = std::max(worst_ss, fp.stationarity_residual(chain.transition));
  }
  return {worst_fp < 1e-10 && worst_ss < 1e-12,
          fmt("max |Psi w* + b| = %.3g, max |d'P - d'| = %.3g over 20 instances", worst_fp, worst_ss)};
}

Verdict k1_reduction() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = default_instance(100 + seed);
    EvalOptions eval;
    eval.w_star = compute_fixed_point(induced_chain(inst.mdp, inst.policy), inst.features).w_star;
    eval.keep_params = true;
    RunConfig cfg;
    cfg.beta = 0.1;
    cfg.K = 1;
    cfg.L = 2000;
    cfg.algorithm = Algorithm::local_td;
    TabularSource a(inst.mdp, inst.policy, inst.features, seed);
    const auto local = run_algorithm(a, inst.consensus, cfg, eval);
    cfg.algorithm = Algorithm::vanilla;
    TabularSource b(inst.mdp, inst.policy, inst.features, seed);
    const auto vanilla = run_algorithm(b, inst.consensus, cfg, eval);
    for (std::size_t l = 0; l < cfg.L; ++l) {
      const auto& x = local.rounds[l];
      const auto& y = vanilla.rounds[l];
      worst = std::max({worst, (x.params - y.params).cwiseAbs().maxCoeff(), std::abs(x.mu_bar - y.mu_bar),
                        std::abs(x.objective_error - y.objective_error), std::abs(x.msbe - y.msbe),
                        std::abs(x.consensus_error - y.consensus_error), std::abs(x.q_norm - y.q_norm)});
    }
    worst = std::max(worst, (local.final_mu - vanilla.final_mu).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt("max per-entry difference %.3g over 5 seeds x 2000 rounds", worst)};
}

Verdict average_dynamics() {
  const auto inst = default_instance(1234);
  const std::size_t K = 50, L = 200;
  RunConfig cfg;
  cfg.algorithm = Algorithm::local_td;
  cfg.beta = 0.005;
  cfg.K = K;
  cfg.L = L;
  InitSpec init{0.0, 0.0, 1.0, 1.0};
  auto s0 = draw_initial_state(init, inst.features.dim(), inst.mdp.num_agents(), 7);
  cfg.initial_w = s0.w;
  cfg.initial_mu = s0.mu;

  std::vector<Eigen::VectorXd> w_bar;
  std::vector<double> mu_bar;
  TabularSource base(inst.mdp, inst.policy, inst.features, 2024);
  RecordingSource<TabularSource> rec(base);
  run_local_td(rec, inst.consensus, cfg, {}, {[&](const StepView& v) {
                 w_bar.push_back(v.params.rowwise().mean());
                 mu_bar.push_back(v.mu.mean());
               }});

  RunConfig single = cfg;
  single.algorithm = Algorithm::single_agent;
  single.initial_w = Eigen::MatrixXd(s0.w.rowwise().mean());
  single.initial_mu = Eigen::VectorXd::Constant(1, s0.mu.mean());
  ReplaySource mean(mean_reward_stream(rec.recorded()));
  std::size_t step = 0;
  double worst = 0.0;
  run_single_agent_td(mean, single, {}, {[&](const StepView& v) {
                        worst = std::max(worst, (v.params.col(0) - w_bar[step]).cwiseAbs().maxCoeff());
                        worst = std::max(worst, std::abs(v.mu(0) - mu_bar[step]));
                        ++step;
                      }});
  return {step == K * L && worst < 1e-9,
          fmt("max |(wbar, mubar) - single-agent (w, mu)| = %.3g over %.0f steps", worst, static_cast<double>(step))};
}

Verdict consensus_bound() {
  struct Family {
    const char* label;
    std::size_t agents;
    GraphKind graph;
    ConsensusScheme scheme;
    double beta;
    std::size_t K;
  };
  const Family families[] = {{"N=3 ring circulant", 3, GraphKind::ring, ConsensusScheme::circulant, 0.004, 5},
                             {"N=4 ring metropolis", 4, GraphKind::ring, ConsensusScheme::metropolis, 0.001, 5}};
  const std::size_t L = 200;
  std::size_t runs = 0, violations = 0, skipped = 0;
  double tightest = 0.0;
  for (const auto& f : families) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SyntheticSpec spec;
      spec.num_agents = f.agents;
      spec.num_states = 8;
      spec.feature_dim = 4;
      spec.topology.graph.kind = f.graph;
      spec.topology.consensus.scheme = f.scheme;
      const auto inst = default_instance(500 + seed, spec);
      const double eta = inst.consensus.eta;
      if (!step_size_condition(f.beta, f.K, eta, f.agents).ok) {
        ++skipped;
        continue;
      }
      for (double spread : {0.0, 2.0}) {
        RunConfig cfg;
        cfg.algorithm = Algorithm::local_td;
        cfg.beta = f.beta;
        cfg.K = f.K;
        cfg.L = L;
        auto s0 = draw_initial_state({0.0, 0.0, spread, 0.0}, inst.features.dim(), f.agents, seed + 1);
        cfg.initial_w = s0.w;
        cfg.initial_mu = s0.mu;
        const double q00 = q_norm(s0.w);
        TabularSource src(inst.mdp, inst.policy, inst.features, seed);
        const auto trace = run_local_td(src, inst.consensus, cfg);
        ++runs;
        for (const auto& r : trace.rounds) {
          const double bound =
              consensus_error_bound({f.agents, eta, f.beta, f.K, r.round, inst.mdp.r_max(), q00}).value;
          if (r.q_norm > bound) ++violations;
          tightest = std::max(tightest, r.q_norm / bound);
        }
      }
    }
  }
  return {violations == 0 && skipped == 0 && runs == 40,
          fmt("%.0f runs x 200 rounds, %.0f violations, %.0f skipped, max measured/bound = %.3g",
              static_cast<double>(runs), static_cast<double>(violations), static_cast<double>(skipped), tightest)};
}

Verdict psi_negative_definite() {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = default_instance(seed);
    const auto fp = compute_fixed_point(induced_chain(inst.mdp, inst.policy), inst.features);
    worst = std::max(worst, fp.psi_symmetric_max_eigenvalue());
  }
  return {worst < 0.0, fmt("largest eigenvalue of (Psi + Psi')/2 over 20 instances = %.3g", worst)};
}

Verdict synthetic_comparison() {
  const auto r = run_trials(preset("synthetic-k50"));
  const auto& local = by_kind(r, Algorithm::local_td);
  const auto& batch = by_kind(r, Algorithm::batching);
  const auto& vanilla = by_kind(r, Algorithm::vanilla);
  const double l200 = metric_at(local, 200, Metric::objective_error);
  const double b200 = metric_at(batch, 200, Metric::objective_error);
  const double v400 = metric_at(vanilla, 400, Metric::objective_error);
  const bool a = std::max(l200, b200) <= 2.0 * std::min(l200, b200);
  const bool b = v400 > l200;
  std::size_t bumps[3];
  const AlgorithmResult* curves[3] = {&local, &batch, &vanilla};
  // vanilla is plotted against communication rounds only up to round 400
  const std::size_t window[3] = {local.mean.size(), batch.mean.size(), std::min<std::size_t>(400, vanilla.mean.size())};
  for (int k = 0; k < 3; ++k) {
    const std::vector<MetricsRow> shown(curves[k]->mean.begin(), curves[k]->mean.begin() + window[k]);
    bumps[k] = increases(block_means(shown, Metric::objective_error, 10));
  }
  const bool c = bumps[0] == 0 && bumps[1] == 0 && bumps[2] == 0;
  std::ostringstream d;
  d << "(a) " << (a ? "ok" : "FAIL") << fmt(" local@200 %.5f batching@200 %.5f", l200, b200) << "; (b) "
    << (b ? "ok" : "FAIL") << fmt(" vanilla@400 %.5f", v400) << "; (c) " << (c ? "ok" : "FAIL")
    << " increasing 10-round block means: local " << bumps[0] << ", batching " << bumps[1] << ", vanilla "
    << bumps[2] << " (first 400 rounds)";
  return {a && b && c, d.str()};
}

Verdict error_floor_vs_K() {
  const auto r = run_trials(preset("local-steps-sweep"));
  std::vector<std::pair<std::size_t, double>> finals;
  for (const auto& a : r.algorithms) finals.emplace_back(a.config.K, a.mean.back().objective_error);
  std::sort(finals.begin(), finals.end());
  bool ok = finals.size() == 4;
  std::ostringstream d;
  for (std::size_t i = 0; i < finals.size(); ++i) {
    if (i > 0 && finals[i].second < finals[i - 1].second) ok = false;
    d << (i ? ", " : "final objective error ") << "K=" << finals[i].first << ": " << fmt("%.5f", finals[i].second);
  }
  return {ok, d.str()};
}

Verdict lyapunov_constants_check() {
  double worst_res = 0.0, worst_rel = 0.0, min_eig = std::numeric_limits<double>::infinity(), asym = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = default_instance(seed);
    const auto fp = compute_fixed_point(induced_chain(inst.mdp, inst.policy), inst.features);
    const auto c = lyapunov_constants(fp.psi, inst.features, fp.d, inst.mdp.r_max());
    const Eigen::MatrixXd a = augmented_psi(fp.psi, inst.features, fp.d);
    const Eigen::MatrixXd res = a.transpose() * c.U + c.U * a + Eigen::MatrixXd::Identity(a.rows(), a.cols());
    worst_res = std::max(worst_res, res.norm());
    asym = std::max(asym, (c.U - c.U.transpose()).cwiseAbs().maxCoeff());
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.U).eigenvalues();
    const double lmax = ev.maxCoeff(), lmin = ev.minCoeff(), r = inst.mdp.r_max();
    min_eig = std::min(min_eig, lmin);
    const double c1 = 0.9 / lmax;
    const double c2 = 2.25 * lmax / lmin;
    const double c3 = 2.0 * lmax * lmax * (r * r + 55.0 * std::pow(1.0 + r, 3)) / (0.9 * lmin);
    for (auto [got, want] : {std::pair{c.c1, c1}, std::pair{c.c2, c2}, std::pair{c.c3, c3}}) {
      worst_rel = std::max(worst_rel, std::abs(got - want) / std::abs(want));
    }
  }
  return {worst_res < 1e-8 && min_eig > 0.0 && asym == 0.0 && worst_rel <= 1e-10,
          fmt("max residual %.3g, min eigenvalue of U %.3g, max relative constant error %.3g", worst_res, min_eig,
              worst_rel)};
}

Verdict navigation_comparison() {
  const auto r = run_trials(preset("navigation"));
  bool decreasing = true;
  std::ostringstream d;
  for (const auto& a : r.algorithms) {
    const double first = a.mean.front().msbe, last = a.mean.back().msbe;
    decreasing = decreasing && last < first;
    d << a.config.name << fmt(" msbe %.4f -> %.4f; ", first, last);
  }
  const auto& local = by_kind(r, Algorithm::local_td);
  const auto& vanilla = by_kind(r, Algorithm::vanilla);
  const double target = 1.1 * local.mean.back().msbe;
  auto first_round = [&](const AlgorithmResult& a) -> std::size_t {
    for (const auto& row : a.mean) {
      if (row.msbe <= target) return row.comm_round;
    }
    return 0;
  };
  const std::size_t rl = first_round(local), rv = first_round(vanilla);
  const bool faster = rl > 0 && (rv == 0 || 2 * rl <= rv);
  d << "rounds to reach " << fmt("%.4f", target) << ": local " << rl << ", vanilla "
    << (rv == 0 ? std::string("never") : std::to_string(rv));
  return {decreasing && faster, d.str()};
}

Verdict sample_accounting() {
  std::size_t checked = 0, bad = 0;
  auto check = [&](const TrialsResult& r) {
    for (const auto& a : r.algorithms) {
      const std::size_t period = a.config.period();
      for (const auto& t : a.trials) {
        for (const auto& row : t.rows) {
          ++checked;
          bad += row.comm_round * period != row.samples;
        }
      }
      for (const auto& row : a.mean) {
        ++checked;
        bad += row.comm_round * period != row.samples;
      }
      bad += a.mean.empty() || a.mean.back().samples != a.config.samples();
    }
    std::stringstream cmp;
    write_comparison(r, cmp);
    std::string line;
    std::getline(cmp, line);
    while (std::getline(cmp, line)) {
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
      ++checked;
      bad += std::stoull(f[5]) * std::stoull(f[6]) != std::stoull(f[7]);
    }
  };
  for (const auto& entry : fs::directory_iterator(DTD_CONFIG_DIR)) {
    if (entry.path().extension() != ".yaml") continue;
    auto cfg = load_config(entry.path());
    cfg.trials = 1;
    check(run_trials(cfg));
  }
  Rng rng(31337);
  for (int k = 0; k < 20; ++k) {
    ExperimentConfig cfg;
    cfg.name = "random";
    cfg.trials = 2;
    cfg.master_seed = rng.next_u64();
    cfg.metrics = {Metric::msbe, Metric::consensus_error};
    cfg.synthetic.num_agents = 2 + rng.below(6);
    cfg.synthetic.num_states = 4 + rng.below(6);
    cfg.synthetic.feature_dim = 2 + rng.below(2);
    cfg.synthetic.topology = {{GraphKind::complete, 4, 0.5}, {ConsensusScheme::metropolis, 0.4, 0.3}};
    const std::size_t K = 1 + rng.below(20), M = 1 + rng.below(20), L = 1 + rng.below(30);
    cfg.algorithms = {{"local", Algorithm::local_td, 0.01, K, L, 1, {}},
                      {"batching", Algorithm::batching, 0.05, 1, L, M, {}},
                      {"vanilla", Algorithm::vanilla, 0.05, 1, L * K, 1, {}},
                      {"single", Algorithm::single_agent, 0.01, K, L, 1, {}}};
    check(run_trials(cfg));
  }
  return {bad == 0, fmt("%.0f rows checked (every preset plus 20 random configs), %.0f mismatches",
                        static_cast<double>(checked), static_cast<double>(bad))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"fixed-point exactness", fixed_point_exactness},
      {"K=1 reduces to vanilla", k1_reduction},
      {"average dynamics equal single-agent TD", average_dynamics},
      {"path-wise consensus-error bound", consensus_bound},
      {"Psi negative definite", psi_negative_definite},
      {"synthetic comparison (K=50, 10 trials)", synthetic_comparison},
      {"error floor non-decreasing in K", error_floor_vs_K},
      {"Lyapunov constants", lyapunov_constants_check},
      {"navigation comparison", navigation_comparison},
      {"sample/communication accounting", sample_accounting},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu %s: %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
