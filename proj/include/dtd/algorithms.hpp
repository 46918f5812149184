#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dtd/error.hpp"
#include "dtd/metrics.hpp"
#include "dtd/source.hpp"
#include "dtd/topology.hpp"

namespace dtd {

enum class Algorithm { local_td, vanilla, batching, single_agent };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::local_td: return "local";
    case Algorithm::vanilla: return "vanilla";
    case Algorithm::batching: return "batching";
    case Algorithm::single_agent: return "single";
  }
  return "unknown";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "local" || s == "local_td") return Algorithm::local_td;
  if (s == "vanilla") return Algorithm::vanilla;
  if (s == "batching" || s == "batch") return Algorithm::batching;
  if (s == "single" || s == "single_agent") return Algorithm::single_agent;
  throw ConfigError("unknown algorithm '" + s + "'");
}

/// Per-agent learner state: value parameters and average-reward tracker.
struct AgentState {
  Eigen::VectorXd w;
  double mu = 0.0;
};

/// delta = r - mu + phi(s')^T w - phi(s)^T w.
inline double td_error(const Eigen::Ref<const Eigen::VectorXd>& w, double mu, const Eigen::VectorXd& phi,
                       const Eigen::VectorXd& phi_next, double reward) {
  return reward - mu + phi_next.dot(w) - phi.dot(w);
}

/// w <- w + beta * delta * phi(s).
inline void local_td_update(Eigen::Ref<Eigen::VectorXd> w, const Eigen::VectorXd& phi, double delta, double beta) {
  w.noalias() += (beta * delta) * phi;
}

inline void local_td_update(AgentState& state, const Eigen::VectorXd& phi, double delta, double beta) {
  local_td_update(state.w, phi, delta, beta);
}

/// mu <- (1 - beta) mu + beta r.
inline double mu_update(double mu, double reward, double beta) { return (1.0 - beta) * mu + beta * reward; }

/// w^i <- sum_j A_ij w^j for every agent (columns of `params`).
inline Eigen::MatrixXd consensus_step(const Eigen::MatrixXd& params, const Eigen::MatrixXd& weights) {
  if (weights.rows() != weights.cols() || weights.cols() != params.cols()) {
    throw ConfigError("consensus_step: weight matrix is " + std::to_string(weights.rows()) + "x" +
                      std::to_string(weights.cols()) + " but there are " + std::to_string(params.cols()) + " agents");
  }
  return params * weights.transpose();
}

struct RunConfig {
  Algorithm algorithm = Algorithm::local_td;
  double beta = 0.005;  // also the batch step size for batching
  std::size_t K = 1;    // local steps per round
  std::size_t L = 1;    // communication rounds
  std::size_t M = 1;    // batch size
  std::uint64_t seed = 0;                    // provenance; the source owns the generator
  std::optional<Eigen::MatrixXd> initial_w;  // n x N, zeros if absent
  std::optional<Eigen::VectorXd> initial_mu; // N, zeros if absent

  /// Samples consumed per communication round.
  std::size_t period() const {
    switch (algorithm) {
      case Algorithm::batching: return M;
      case Algorithm::vanilla: return 1;
      default: return K;
    }
  }
};

/// What the run records besides parameters.
struct EvalOptions {
  Eigen::VectorXd w_star;  // empty: no objective error
  bool keep_params = false;
  bool per_sample_msbe = false;
};

struct RoundRecord {
  std::size_t round = 0;
  std::size_t samples = 0;
  double mu_bar = 0.0;
  double objective_error = std::numeric_limits<double>::quiet_NaN();
  double msbe = std::numeric_limits<double>::quiet_NaN();
  double consensus_error = 0.0;
  double q_norm = 0.0;
  Eigen::VectorXd w_bar;
  Eigen::MatrixXd params;  // only with keep_params
};

struct RunTrace {
  Algorithm algorithm = Algorithm::local_td;
  std::size_t period = 1;
  RoundRecord initial;
  std::vector<RoundRecord> rounds;  // rounds[l-1] is the state after the l-th consensus
  Eigen::MatrixXd final_w;
  Eigen::VectorXd final_mu;
  double mu_bar0 = 0.0;
  std::size_t total_samples = 0;
  std::vector<double> msbe_per_sample;
  std::vector<std::string> warnings;

  std::vector<MetricsRow> rows(long long trial) const {
    std::vector<MetricsRow> out;
    out.reserve(rounds.size());
    for (const auto& r : rounds) {
      out.push_back({trial, r.round, r.samples, r.objective_error, r.msbe, r.consensus_error, r.q_norm});
    }
    return out;
  }
};

/// Read-only view handed to observers after every local step.
struct StepView {
  std::size_t round;
  std::size_t step;
  const Eigen::MatrixXd& params;
  const Eigen::VectorXd& mu;
};

struct RunObserver {
  std::function<void(const StepView&)> on_step;
};

namespace detail {

class TraceRecorder {
 public:
  TraceRecorder(Algorithm algorithm, std::size_t period, const EvalOptions& eval, const Eigen::MatrixXd& w0,
                const Eigen::VectorXd& mu0, std::size_t expected_rounds)
      : eval_(eval) {
    trace_.algorithm = algorithm;
    trace_.period = period;
    trace_.mu_bar0 = mu0.mean();
    trace_.initial = snapshot(0, 0, w0, mu0);
    trace_.rounds.reserve(expected_rounds);
  }

  void observe_sample(const Eigen::MatrixXd& w, const Eigen::VectorXd& mu, const Sample& s) {
    msbe_.add(sbe(w, s.phi, s.phi_next, s.rewards.mean(), mu.mean()));
    ++samples_;
    if (eval_.per_sample_msbe) trace_.msbe_per_sample.push_back(msbe_.value());
  }

  void close_round(std::size_t round, const Eigen::MatrixXd& w, const Eigen::VectorXd& mu) {
    trace_.rounds.push_back(snapshot(round, samples_, w, mu));
  }

  void warn(std::string message) { trace_.warnings.push_back(std::move(message)); }

  RunTrace finish(Eigen::MatrixXd w, Eigen::VectorXd mu) {
    trace_.final_w = std::move(w);
    trace_.final_mu = std::move(mu);
    trace_.total_samples = samples_;
    return std::move(trace_);
  }

 private:
  RoundRecord snapshot(std::size_t round, std::size_t samples, const Eigen::MatrixXd& w, const Eigen::VectorXd& mu) {
    RoundRecord r;
    r.round = round;
    r.samples = samples;
    r.mu_bar = mu.mean();
    if (eval_.w_star.size() > 0) r.objective_error = objective_error(w, eval_.w_star);
    r.msbe = msbe_.value();
    r.consensus_error = consensus_error(w);
    r.q_norm = q_norm(w);
    r.w_bar = w.rowwise().mean();
    if (eval_.keep_params) r.params = w;
    return r;
  }

  const EvalOptions& eval_;
  RunningMsbe msbe_;
  std::size_t samples_ = 0;
  RunTrace trace_;
};

struct InitialState {
  Eigen::MatrixXd w;
  Eigen::VectorXd mu;
};

inline InitialState initial_state(const RunConfig& cfg, std::size_t n, std::size_t agents) {
  if (!(cfg.beta > 0.0)) throw ConfigError("run: beta must be > 0");
  if (cfg.K < 1 || cfg.L < 1 || cfg.M < 1) throw ConfigError("run: K, L and M must be >= 1");
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(agents);
  InitialState s{Eigen::MatrixXd::Zero(rows, cols), Eigen::VectorXd::Zero(cols)};
  if (cfg.initial_w) {
    if (cfg.initial_w->rows() != rows || cfg.initial_w->cols() != cols) {
      throw ConfigError("run: initial_w must be " + std::to_string(n) + " x " + std::to_string(agents));
    }
    s.w = *cfg.initial_w;
  }
  if (cfg.initial_mu) {
    if (cfg.initial_mu->size() != cols) throw ConfigError("run: initial_mu must have one entry per agent");
    s.mu = *cfg.initial_mu;
  }
  return s;
}

inline void check_weights(const ConsensusMatrix& a, std::size_t agents, TraceRecorder& rec) {
  if (a.size() != agents) {
    throw ConfigError("run: consensus matrix is " + std::to_string(a.size()) + "x" + std::to_string(a.size()) +
                      " for " + std::to_string(agents) + " agents");
  }
  if (!validate_consensus(a.weights).satisfies_weight_assumption()) {
    rec.warn("consensus matrix is not doubly stochastic with positive diagonal; the agent average is not preserved");
  }
}

inline void check_finite(const Eigen::MatrixXd& w, const Eigen::VectorXd& mu, std::size_t round, std::size_t step) {
  if (!w.allFinite() || !mu.allFinite()) throw DivergenceError("non-finite parameters", round, step);
}

}  // namespace detail

/// Decentralized TD with K local TD steps between consecutive consensus rounds.
/// All agents see the same state sequence; agent i reads only its own reward.
/// The trackers mu^i are never averaged.
template <SampleSource Source>
RunTrace run_local_td(Source& source, const ConsensusMatrix& a, const RunConfig& cfg, const EvalOptions& eval = {},
                      const RunObserver& observer = {}) {
  const auto agents = source.num_agents();
  auto [w, mu] = detail::initial_state(cfg, source.feature_dim(), agents);
  detail::TraceRecorder rec(Algorithm::local_td, cfg.K, eval, w, mu, cfg.L);
  detail::check_weights(a, agents, rec);
  if (a.eta > 0.0) {
    const auto cond = step_size_condition(cfg.beta, cfg.K, a.eta, agents);
    if (!cond.ok) {
      char msg[128];
      std::snprintf(msg, sizeof msg, "beta*K = %.6g exceeds the consensus contraction threshold %.6g",
                    cfg.beta * static_cast<double>(cfg.K), cond.threshold);
      rec.warn(msg);
    }
  }
  for (std::size_t l = 0; l < cfg.L; ++l) {
    for (std::size_t k = 0; k < cfg.K; ++k) {
      const Sample& s = source.next();
      rec.observe_sample(w, mu, s);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(agents); ++i) {
        const double r = s.rewards(i);
        const double delta = td_error(w.col(i), mu(i), s.phi, s.phi_next, r);
        mu(i) = mu_update(mu(i), r, cfg.beta);
        local_td_update(w.col(i), s.phi, delta, cfg.beta);
      }
      detail::check_finite(w, mu, l, k);
      if (observer.on_step) observer.on_step({l, k, w, mu});
    }
    w = consensus_step(w, a.weights);
    rec.close_round(l + 1, w, mu);
  }
  return rec.finish(std::move(w), std::move(mu));
}

/// Vanilla distributed TD: one sample, one update, one consensus per round.
/// Written in stacked matrix form, independently of run_local_td.
template <SampleSource Source>
RunTrace run_vanilla_td(Source& source, const ConsensusMatrix& a, const RunConfig& cfg, const EvalOptions& eval = {},
                        const RunObserver& observer = {}) {
  if (cfg.K != 1) throw ConfigError("vanilla TD performs exactly one local step per round (K = 1)");
  const auto agents = source.num_agents();
  auto [w, mu] = detail::initial_state(cfg, source.feature_dim(), agents);
  detail::TraceRecorder rec(Algorithm::vanilla, 1, eval, w, mu, cfg.L);
  detail::check_weights(a, agents, rec);
  const double beta = cfg.beta;
  const Eigen::MatrixXd at = a.weights.transpose();
  for (std::size_t l = 0; l < cfg.L; ++l) {
    const Sample& s = source.next();
    rec.observe_sample(w, mu, s);
    const Eigen::VectorXd delta = (s.rewards - mu) + w.transpose() * (s.phi_next - s.phi);
    mu = beta * s.rewards + (1.0 - beta) * mu;
    w += beta * s.phi * delta.transpose();
    detail::check_finite(w, mu, l, 0);
    if (observer.on_step) observer.on_step({l, 0, w, mu});
    w = (w * at).eval();
    rec.close_round(l + 1, w, mu);
  }
  return rec.finish(std::move(w), std::move(mu));
}

/// Batching: M samples per round evaluated at the round's frozen parameters,
/// one update with the batch-mean increment, then consensus. The tracker moves
/// once per batch towards the batch-mean reward.
template <SampleSource Source>
RunTrace run_batch_td(Source& source, const ConsensusMatrix& a, const RunConfig& cfg, const EvalOptions& eval = {},
                      const RunObserver& observer = {}) {
  const auto agents = source.num_agents();
  const auto N = static_cast<Eigen::Index>(agents);
  auto [w, mu] = detail::initial_state(cfg, source.feature_dim(), agents);
  detail::TraceRecorder rec(Algorithm::batching, cfg.M, eval, w, mu, cfg.L);
  detail::check_weights(a, agents, rec);
  const double inv_m = 1.0 / static_cast<double>(cfg.M);
  Eigen::MatrixXd increment(w.rows(), w.cols());
  Eigen::VectorXd reward_sum(N);
  for (std::size_t l = 0; l < cfg.L; ++l) {
    increment.setZero();
    reward_sum.setZero();
    for (std::size_t m = 0; m < cfg.M; ++m) {
      const Sample& s = source.next();
      rec.observe_sample(w, mu, s);
      for (Eigen::Index i = 0; i < N; ++i) {
        const double delta = td_error(w.col(i), mu(i), s.phi, s.phi_next, s.rewards(i));
        increment.col(i) += delta * s.phi;
      }
      reward_sum += s.rewards;
    }
    w += cfg.beta * inv_m * increment;
    for (Eigen::Index i = 0; i < N; ++i) mu(i) = mu_update(mu(i), inv_m * reward_sum(i), cfg.beta);
    detail::check_finite(w, mu, l, cfg.M - 1);
    if (observer.on_step) observer.on_step({l, cfg.M - 1, w, mu});
    w = consensus_step(w, a.weights);
    rec.close_round(l + 1, w, mu);
  }
  return rec.finish(std::move(w), std::move(mu));
}

/// Single-agent average-reward TD(0). Runs L*K steps and checkpoints every K
/// steps so traces line up with multi-agent rounds. The source must report one
/// agent (see mean_reward_stream for feeding agent-mean rewards).
template <SampleSource Source>
RunTrace run_single_agent_td(Source& source, const RunConfig& cfg, const EvalOptions& eval = {},
                             const RunObserver& observer = {}) {
  if (source.num_agents() != 1) throw ConfigError("single-agent TD needs a one-agent reward stream");
  auto [w, mu] = detail::initial_state(cfg, source.feature_dim(), 1);
  detail::TraceRecorder rec(Algorithm::single_agent, cfg.K, eval, w, mu, cfg.L);
  for (std::size_t l = 0; l < cfg.L; ++l) {
    for (std::size_t k = 0; k < cfg.K; ++k) {
      const Sample& s = source.next();
      rec.observe_sample(w, mu, s);
      const double r = s.rewards(0);
      const double delta = td_error(w.col(0), mu(0), s.phi, s.phi_next, r);
      mu(0) = mu_update(mu(0), r, cfg.beta);
      local_td_update(w.col(0), s.phi, delta, cfg.beta);
      detail::check_finite(w, mu, l, k);
      if (observer.on_step) observer.on_step({l, k, w, mu});
    }
    rec.close_round(l + 1, w, mu);
  }
  return rec.finish(std::move(w), std::move(mu));
}

/// Dispatch on cfg.algorithm. Single-agent runs ignore the consensus matrix.
template <SampleSource Source>
RunTrace run_algorithm(Source& source, const ConsensusMatrix& a, const RunConfig& cfg, const EvalOptions& eval = {},
                       const RunObserver& observer = {}) {
  switch (cfg.algorithm) {
    case Algorithm::local_td: return run_local_td(source, a, cfg, eval, observer);
    case Algorithm::vanilla: return run_vanilla_td(source, a, cfg, eval, observer);
    case Algorithm::batching: return run_batch_td(source, a, cfg, eval, observer);
    case Algorithm::single_agent: return run_single_agent_td(source, cfg, eval, observer);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace dtd
