#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dtd/algorithms.hpp"
#include "dtd/config.hpp"
#include "dtd/csv.hpp"
#include "dtd/error.hpp"
#include "dtd/fixedpoint.hpp"
#include "dtd/instance_io.hpp"
#include "dtd/metrics.hpp"
#include "dtd/navigation.hpp"
#include "dtd/rng.hpp"
#include "dtd/synthetic.hpp"

namespace dtd {

/// Stream ids passed to derive_seed(trial_seed, .).
enum SeedStream : std::uint64_t { instance_stream = 0, trajectory_stream = 2, init_stream = 3 };

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) { return master ^ trial; }

struct TrialOutcome {
  std::size_t trial = 0;
  bool diverged = false;
  std::string error;
  std::vector<MetricsRow> rows;
  std::vector<std::string> warnings;
};

struct AlgorithmResult {
  AlgorithmConfig config;
  std::vector<TrialOutcome> trials;  // indexed by trial
  std::vector<MetricsRow> mean;      // per-round mean over surviving trials, trial = -1

  std::size_t surviving() const {
    return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [](const auto& t) { return !t.diverged; }));
  }
};

struct TrialsResult {
  std::vector<AlgorithmResult> algorithms;
  std::vector<std::string> warnings;
};

/// Initial (w, mu) shared by every algorithm of one trial.
inline detail::InitialState draw_initial_state(const InitSpec& spec, std::size_t n, std::size_t agents,
                                               std::uint64_t seed) {
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(agents);
  detail::InitialState s{Eigen::MatrixXd::Constant(rows, cols, spec.w), Eigen::VectorXd::Constant(cols, spec.mu)};
  if (spec.w_spread > 0.0 || spec.mu_spread > 0.0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < cols; ++i) {
      for (Eigen::Index j = 0; j < rows; ++j) s.w(j, i) += rng.uniform(-spec.w_spread, spec.w_spread);
      s.mu(i) += rng.uniform(-spec.mu_spread, spec.mu_spread);
    }
  }
  return s;
}

/// Per-round mean of the selected metrics over the given traces; every trace
/// must have the same round grid.
inline std::vector<MetricsRow> mean_rows(const std::vector<const std::vector<MetricsRow>*>& traces) {
  std::vector<MetricsRow> out;
  if (traces.empty()) return out;
  const auto& first = *traces.front();
  out.resize(first.size());
  const double inv = 1.0 / static_cast<double>(traces.size());
  for (std::size_t r = 0; r < first.size(); ++r) {
    MetricsRow m{-1, first[r].comm_round, first[r].samples, 0.0, 0.0, 0.0, 0.0};
    for (const auto* t : traces) {
      const auto& row = (*t)[r];
      if (row.comm_round != m.comm_round || row.samples != m.samples) {
        throw NumericalError("mean_rows: traces disagree on the round grid");
      }
      m.objective_error += row.objective_error * inv;
      m.msbe += row.msbe * inv;
      m.consensus_error += row.consensus_error * inv;
      m.q_norm += row.q_norm * inv;
    }
    out[r] = m;
  }
  return out;
}

namespace detail {

inline void mask_metrics(std::vector<MetricsRow>& rows, const ExperimentConfig& cfg) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (auto& r : rows) {
    if (!cfg.wants(Metric::objective_error)) r.objective_error = nan;
    if (!cfg.wants(Metric::msbe)) r.msbe = nan;
    if (!cfg.wants(Metric::consensus_error)) r.consensus_error = nan;
    if (!cfg.wants(Metric::q_norm)) r.q_norm = nan;
  }
}

template <SampleSource Source>
TrialOutcome run_one(Source& source, const ConsensusMatrix& a, const AlgorithmConfig& alg, const EvalOptions& eval,
                     std::size_t trial, std::uint64_t init_seed, const ExperimentConfig& cfg) {
  TrialOutcome out;
  out.trial = trial;
  RunConfig rc = alg.run_config();
  const std::size_t agents = alg.kind == Algorithm::single_agent ? 1 : source.num_agents();
  auto init = draw_initial_state(alg.init, source.feature_dim(), agents, init_seed);
  rc.initial_w = std::move(init.w);
  rc.initial_mu = std::move(init.mu);
  try {
    RunTrace trace;
    if (alg.kind == Algorithm::single_agent) {
      MeanRewardSource<Source> mean(source);
      trace = run_algorithm(mean, a, rc, eval);
    } else {
      trace = run_algorithm(source, a, rc, eval);
    }
    out.rows = trace.rows(static_cast<long long>(trial));
    mask_metrics(out.rows, cfg);
    out.warnings = std::move(trace.warnings);
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.error = e.what();
  }
  return out;
}

/// Everything one trial of a config needs, rebuilt per trial from its seed.
inline std::vector<TrialOutcome> run_trial(const ExperimentConfig& cfg, const std::optional<Instance>& fixed,
                                           std::size_t trial) {
  const auto seed = trial_seed(cfg.master_seed, trial);
  const auto traj_seed = derive_seed(seed, trajectory_stream);
  const auto init_seed = derive_seed(seed, init_stream);
  std::vector<TrialOutcome> out;
  out.reserve(cfg.algorithms.size());
  if (cfg.model == ModelKind::navigation) {
    Rng rng(derive_seed(seed, instance_stream));
    const auto start = random_nav_state(cfg.navigation, rng);
    const auto graph = build_graph(cfg.topology.graph, cfg.navigation.num_agents, rng);
    const auto a = consensus_matrix(graph, cfg.topology.consensus);
    for (const auto& alg : cfg.algorithms) {
      NavigationSource src(cfg.navigation, start, traj_seed);
      out.push_back(run_one(src, a, alg, {}, trial, init_seed, cfg));
    }
    return out;
  }
  std::optional<Instance> generated;
  if (!fixed) {
    Rng rng(derive_seed(seed, instance_stream));
    generated.emplace(gen_synthetic(cfg.synthetic, rng));
    generated->mdp.seed = derive_seed(seed, instance_stream);
  }
  const Instance& inst = fixed ? *fixed : *generated;
  EvalOptions eval;
  if (cfg.wants(Metric::objective_error)) {
    eval.w_star = compute_fixed_point(induced_chain(inst.mdp, inst.policy), inst.features).w_star;
  }
  for (const auto& alg : cfg.algorithms) {
    TabularSource src(inst.mdp, inst.policy, inst.features, traj_seed);
    out.push_back(run_one(src, inst.consensus, alg, eval, trial, init_seed, cfg));
  }
  return out;
}

}  // namespace detail

/// Runs every configured algorithm on every trial. Trial t uses seed
/// master ^ t; within a trial all algorithms share the instance, the
/// trajectory seed and the initial parameters. Diverged trials are recorded
/// and left out of the means.
inline TrialsResult run_trials(const ExperimentConfig& cfg) {
  validate(cfg);
  std::optional<Instance> fixed;
  if (cfg.model == ModelKind::instance) fixed.emplace(load_instance(cfg.instance_path));

  std::vector<std::vector<TrialOutcome>> per_trial(cfg.trials);
  std::size_t workers = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  workers = std::min(workers, cfg.trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t t = next++; t < cfg.trials; t = next++) {
      try {
        per_trial[t] = detail::run_trial(cfg, fixed, t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.trials;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  TrialsResult result;
  for (std::size_t k = 0; k < cfg.algorithms.size(); ++k) {
    AlgorithmResult ar;
    ar.config = cfg.algorithms[k];
    std::vector<const std::vector<MetricsRow>*> alive;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      ar.trials.push_back(std::move(per_trial[t][k]));
      const auto& o = ar.trials.back();
      if (o.diverged) {
        result.warnings.push_back(ar.config.name + ": trial " + std::to_string(t) + " diverged: " + o.error);
      } else {
        alive.push_back(&o.rows);
      }
      for (const auto& w : o.warnings) {
        const auto msg = ar.config.name + ": " + w;
        if (std::find(result.warnings.begin(), result.warnings.end(), msg) == result.warnings.end()) {
          result.warnings.push_back(msg);
        }
      }
    }
    if (alive.empty()) {
      result.warnings.push_back(ar.config.name + ": every trial diverged; no mean rows");
    } else if (alive.size() < cfg.trials) {
      result.warnings.push_back(ar.config.name + ": mean over " + std::to_string(alive.size()) + " of " +
                                std::to_string(cfg.trials) + " trials");
    }
    ar.mean = mean_rows(alive);
    result.algorithms.push_back(std::move(ar));
  }
  return result;
}

inline constexpr const char* kComparisonHeader =
    "name,kind,beta,K,M,L,period,samples,trials,diverged,final_objective_error,final_msbe,final_consensus_error,"
    "final_q_norm";

inline void write_comparison(const TrialsResult& r, std::ostream& out) {
  out << kComparisonHeader << '\n';
  for (const auto& a : r.algorithms) {
    const auto& c = a.config;
    MetricsRow last;
    if (!a.mean.empty()) last = a.mean.back();
    out << c.name << ',' << to_string(c.kind) << ',' << format_double(c.beta) << ',' << c.K << ',' << c.M << ','
        << c.L << ',' << c.period() << ',' << c.samples() << ',' << a.trials.size() << ','
        << a.trials.size() - a.surviving() << ',' << format_double(last.objective_error) << ','
        << format_double(last.msbe) << ',' << format_double(last.consensus_error) << ','
        << format_double(last.q_norm) << '\n';
  }
}

/// `<name>.csv` (means), `<name>_trials.csv` (surviving trials) per algorithm
/// and `comparison.csv`. Returns the written paths.
inline std::vector<std::filesystem::path> write_results(const TrialsResult& r, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": " + ec.message());
  for (const auto& a : r.algorithms) {
    const auto mean_path = dir / (a.config.name + ".csv");
    write_csv(a.mean, mean_path);
    written.push_back(mean_path);
    std::vector<MetricsRow> all;
    for (const auto& t : a.trials) {
      if (!t.diverged) all.insert(all.end(), t.rows.begin(), t.rows.end());
    }
    const auto trials_path = dir / (a.config.name + "_trials.csv");
    write_csv(all, trials_path);
    written.push_back(trials_path);
  }
  const auto cmp = dir / "comparison.csv";
  std::ofstream out(cmp, std::ios::binary);
  if (!out) throw IoError(cmp.string() + ": cannot open for writing");
  write_comparison(r, out);
  if (!out) throw IoError(cmp.string() + ": write failed");
  written.push_back(cmp);
  return written;
}

}  // namespace dtd
