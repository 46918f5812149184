#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtd/error.hpp"
#include "dtd/rng.hpp"
#include "dtd/source.hpp"

namespace dtd {

inline constexpr double kProbabilityTolerance = 1e-12;

/// Largest joint-action space stored densely.
inline constexpr std::size_t kMaxDenseJointActions = 4096;

namespace detail {

inline void check_stochastic_rows(const Eigen::MatrixXd& m, const std::string& what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double p = m(r, c);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError(what + ": entry (" + std::to_string(r) + "," + std::to_string(c) +
                          ") outside [0,1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance) {
      throw ConfigError(what + ": row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
  }
}

}  // namespace detail

/// Mixed-radix joint action index; agent 0 is the least significant digit.
inline std::size_t encode_joint_action(std::span<const int> actions, std::span<const int> radix) {
  std::size_t index = 0;
  for (std::size_t i = radix.size(); i-- > 0;) {
    index = index * static_cast<std::size_t>(radix[i]) + static_cast<std::size_t>(actions[i]);
  }
  return index;
}

inline std::vector<int> decode_joint_action(std::size_t index, std::span<const int> radix) {
  std::vector<int> actions(radix.size());
  for (std::size_t i = 0; i < radix.size(); ++i) {
    actions[i] = static_cast<int>(index % static_cast<std::size_t>(radix[i]));
    index /= static_cast<std::size_t>(radix[i]);
  }
  return actions;
}

/// Networked multi-agent MDP over a tabular global state.
///
/// Two storage modes:
///  - factored: transitions depend on the state only (|S| x |S|) and each
///    agent's mean reward depends on the state only (N x |S|);
///  - dense: transitions are ((|S|*|A|) x |S|) with row s*|A| + a, rewards are
///    N x (|S|*|A|). Only for joint action spaces up to kMaxDenseJointActions.
///
/// Realized rewards are the mean table entry plus Uniform(-h, h) noise.
class MultiAgentMdp {
 public:
  static MultiAgentMdp factored(Eigen::MatrixXd transition, Eigen::MatrixXd rewards,
                                std::vector<int> actions_per_agent, double noise_half_width,
                                double r_max) {
    MultiAgentMdp m;
    m.factored_ = true;
    m.init(std::move(transition), std::move(rewards), std::move(actions_per_agent),
           noise_half_width, r_max);
    return m;
  }

  static MultiAgentMdp dense(Eigen::MatrixXd transition, Eigen::MatrixXd rewards,
                             std::vector<int> actions_per_agent, double noise_half_width,
                             double r_max) {
    MultiAgentMdp m;
    m.factored_ = false;
    m.init(std::move(transition), std::move(rewards), std::move(actions_per_agent),
           noise_half_width, r_max);
    return m;
  }

  std::size_t num_agents() const { return actions_.size(); }
  std::size_t num_states() const { return static_cast<std::size_t>(transition_.cols()); }
  std::size_t num_joint_actions() const { return joint_actions_; }
  const std::vector<int>& actions_per_agent() const { return actions_; }
  bool is_factored() const { return factored_; }
  double noise_half_width() const { return noise_; }
  double r_max() const { return r_max_; }

  const Eigen::MatrixXd& transition() const { return transition_; }
  const Eigen::MatrixXd& rewards() const { return rewards_; }

  /// Row of P(. | s, a).
  auto next_state_distribution(std::size_t s, std::size_t a) const {
    return transition_.row(static_cast<Eigen::Index>(factored_ ? s : s * joint_actions_ + a));
  }

  double mean_reward(std::size_t agent, std::size_t s, std::size_t a) const {
    return rewards_(static_cast<Eigen::Index>(agent),
                    static_cast<Eigen::Index>(factored_ ? s : s * joint_actions_ + a));
  }

  /// Seed the instance was generated from, if any. Provenance only.
  std::optional<std::uint64_t> seed;

 private:
  MultiAgentMdp() = default;

  void init(Eigen::MatrixXd transition, Eigen::MatrixXd rewards, std::vector<int> actions,
            double noise, double r_max) {
    if (actions.empty()) throw ConfigError("MultiAgentMdp: need at least one agent");
    std::size_t joint = 1;
    for (int a : actions) {
      if (a < 1) throw ConfigError("MultiAgentMdp: action counts must be positive");
      joint *= static_cast<std::size_t>(a);
      if (!factored_ && joint > kMaxDenseJointActions) {
        throw ConfigError("MultiAgentMdp: dense mode supports at most " +
                          std::to_string(kMaxDenseJointActions) + " joint actions");
      }
      if (joint > (std::size_t{1} << 62)) throw ConfigError("MultiAgentMdp: joint action space overflow");
    }
    const auto states = transition.cols();
    if (states < 1) throw ConfigError("MultiAgentMdp: need at least one state");
    const auto expected_rows = factored_ ? states : states * static_cast<Eigen::Index>(joint);
    if (transition.rows() != expected_rows) {
      throw ConfigError("MultiAgentMdp: transition has " + std::to_string(transition.rows()) +
                        " rows, expected " + std::to_string(expected_rows));
    }
    if (rewards.rows() != static_cast<Eigen::Index>(actions.size()) || rewards.cols() != expected_rows) {
      throw ConfigError("MultiAgentMdp: reward table shape mismatch");
    }
    detail::check_stochastic_rows(transition, "MultiAgentMdp transition");
    if (!(noise >= 0.0)) throw ConfigError("MultiAgentMdp: noise half-width must be >= 0");
    if (!(r_max > 0.0)) throw ConfigError("MultiAgentMdp: r_max must be > 0");
    if (!rewards.allFinite()) throw ConfigError("MultiAgentMdp: rewards must be finite");
    const double worst = rewards.cwiseAbs().maxCoeff() + noise;
    if (worst > r_max + 1e-12) {
      throw AssumptionViolation("bounded rewards: |r| + noise = " + std::to_string(worst) +
                                " exceeds r_max = " + std::to_string(r_max));
    }
    transition_ = std::move(transition);
    rewards_ = std::move(rewards);
    actions_ = std::move(actions);
    joint_actions_ = joint;
    noise_ = noise;
    r_max_ = r_max;
  }

  bool factored_ = true;
  Eigen::MatrixXd transition_;
  Eigen::MatrixXd rewards_;
  std::vector<int> actions_;
  std::size_t joint_actions_ = 1;
  double noise_ = 0.0;
  double r_max_ = 1.0;
};

/// Product policy pi(a|s) = prod_i pi^i(a^i|s); one |S| x |A^i| table per agent.
class JointPolicy {
 public:
  explicit JointPolicy(std::vector<Eigen::MatrixXd> per_agent) : tables_(std::move(per_agent)) {
    if (tables_.empty()) throw ConfigError("JointPolicy: need at least one agent");
    for (std::size_t i = 0; i < tables_.size(); ++i) {
      if (tables_[i].rows() != tables_.front().rows()) {
        throw ConfigError("JointPolicy: agents disagree on the number of states");
      }
      detail::check_stochastic_rows(tables_[i], "JointPolicy agent " + std::to_string(i));
    }
  }

  static JointPolicy uniform(std::size_t num_states, const std::vector<int>& actions_per_agent) {
    std::vector<Eigen::MatrixXd> tables;
    for (int a : actions_per_agent) {
      tables.push_back(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(num_states), a, 1.0 / a));
    }
    return JointPolicy(std::move(tables));
  }

  std::size_t num_agents() const { return tables_.size(); }
  std::size_t num_states() const { return static_cast<std::size_t>(tables_.front().rows()); }
  const Eigen::MatrixXd& agent(std::size_t i) const { return tables_[i]; }
  const std::vector<Eigen::MatrixXd>& tables() const { return tables_; }

  std::vector<int> actions_per_agent() const {
    std::vector<int> out;
    for (const auto& t : tables_) out.push_back(static_cast<int>(t.cols()));
    return out;
  }

  double probability(std::size_t s, std::span<const int> joint) const {
    double p = 1.0;
    for (std::size_t i = 0; i < tables_.size(); ++i) {
      p *= tables_[i](static_cast<Eigen::Index>(s), joint[i]);
    }
    return p;
  }

 private:
  std::vector<Eigen::MatrixXd> tables_;
};

/// Feature matrix Phi, one row per state.
class FeatureMap {
 public:
  explicit FeatureMap(Eigen::MatrixXd phi) : phi_(std::move(phi)) {
    if (phi_.rows() < 1 || phi_.cols() < 1) throw ConfigError("FeatureMap: empty feature matrix");
    if (!phi_.allFinite()) throw ConfigError("FeatureMap: non-finite features");
  }

  std::size_t num_states() const { return static_cast<std::size_t>(phi_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(phi_.cols()); }
  const Eigen::MatrixXd& matrix() const { return phi_; }
  auto row(std::size_t s) const { return phi_.row(static_cast<Eigen::Index>(s)); }

 private:
  Eigen::MatrixXd phi_;
};

struct Transition {
  std::size_t state = 0;
  std::size_t joint_action = 0;
  std::size_t next_state = 0;
  std::vector<double> rewards;
};

/// State-to-state chain under a fixed policy, with policy-averaged rewards.
struct InducedChain {
  Eigen::MatrixXd transition;    // P^pi, |S| x |S|
  Eigen::MatrixXd agent_reward;  // N x |S|, sum_a pi(a|s) r^i(s,a)
  Eigen::VectorXd mean_reward;   // |S|, average over agents

  std::size_t num_states() const { return static_cast<std::size_t>(transition.rows()); }
  std::size_t num_agents() const { return static_cast<std::size_t>(agent_reward.rows()); }
};

inline void check_compatible(const MultiAgentMdp& mdp, const JointPolicy& policy) {
  if (policy.num_agents() != mdp.num_agents()) throw ConfigError("policy/MDP agent count mismatch");
  if (policy.num_states() != mdp.num_states()) throw ConfigError("policy/MDP state count mismatch");
  if (policy.actions_per_agent() != mdp.actions_per_agent()) {
    throw ConfigError("policy/MDP action count mismatch");
  }
}

inline InducedChain induced_chain(const MultiAgentMdp& mdp, const JointPolicy& policy) {
  check_compatible(mdp, policy);
  const auto S = static_cast<Eigen::Index>(mdp.num_states());
  const auto N = static_cast<Eigen::Index>(mdp.num_agents());
  InducedChain chain;
  if (mdp.is_factored()) {
    chain.transition = mdp.transition();
    chain.agent_reward = mdp.rewards();
  } else {
    chain.transition = Eigen::MatrixXd::Zero(S, S);
    chain.agent_reward = Eigen::MatrixXd::Zero(N, S);
    const auto& radix = mdp.actions_per_agent();
    for (Eigen::Index s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < mdp.num_joint_actions(); ++a) {
        const auto joint = decode_joint_action(a, radix);
        const double p = policy.probability(static_cast<std::size_t>(s), joint);
        if (p == 0.0) continue;
        chain.transition.row(s) += p * mdp.next_state_distribution(static_cast<std::size_t>(s), a);
        for (Eigen::Index i = 0; i < N; ++i) {
          chain.agent_reward(i, s) += p * mdp.mean_reward(static_cast<std::size_t>(i), static_cast<std::size_t>(s), a);
        }
      }
    }
  }
  chain.mean_reward = chain.agent_reward.colwise().mean().transpose();
  return chain;
}

/// One step of the policy-induced process from state `s`. Draw order is fixed:
/// agent actions 0..N-1, next state, reward noise for agents 0..N-1.
inline Transition sample_step(const MultiAgentMdp& mdp, const JointPolicy& policy, std::size_t s,
                              Rng& rng) {
  if (s >= mdp.num_states()) throw ConfigError("sample_step: state index out of range");
  const auto N = mdp.num_agents();
  const auto& radix = mdp.actions_per_agent();
  std::vector<int> actions(N);
  for (std::size_t i = 0; i < N; ++i) {
    actions[i] = static_cast<int>(rng.categorical(policy.agent(i).row(static_cast<Eigen::Index>(s))));
  }
  Transition t;
  t.state = s;
  t.joint_action = encode_joint_action(actions, radix);
  t.next_state = rng.categorical(mdp.next_state_distribution(s, t.joint_action));
  t.rewards.resize(N);
  const double h = mdp.noise_half_width();
  for (std::size_t i = 0; i < N; ++i) {
    const double noise = h * (2.0 * rng.uniform01() - 1.0);
    t.rewards[i] = mdp.mean_reward(i, s, t.joint_action) + noise;
  }
  return t;
}

enum class FeatureIssue { dimension_not_below_states, row_norm_exceeds_one, rank_deficient, represents_constant };

struct FeatureReport {
  struct Entry {
    FeatureIssue issue;
    std::string message;
  };
  std::vector<Entry> failures;

  bool ok() const { return failures.empty(); }
  bool has(FeatureIssue issue) const {
    for (const auto& f : failures) {
      if (f.issue == issue) return true;
    }
    return false;
  }
};

inline const char* to_string(FeatureIssue issue) {
  switch (issue) {
    case FeatureIssue::dimension_not_below_states: return "dimension_not_below_states";
    case FeatureIssue::row_norm_exceeds_one: return "row_norm_exceeds_one";
    case FeatureIssue::rank_deficient: return "rank_deficient";
    case FeatureIssue::represents_constant: return "represents_constant";
  }
  return "unknown";
}

/// Checks n < |S|, ||phi(s)|| <= 1, full column rank and that no Phi u equals
/// the all-ones vector.
inline FeatureReport validate_features(const FeatureMap& fm) {
  FeatureReport report;
  const auto& phi = fm.matrix();
  if (fm.dim() >= fm.num_states()) {
    report.failures.push_back({FeatureIssue::dimension_not_below_states,
                               "feature dimension " + std::to_string(fm.dim()) +
                                   " is not below the number of states " + std::to_string(fm.num_states())});
  }
  for (Eigen::Index s = 0; s < phi.rows(); ++s) {
    const double norm = phi.row(s).norm();
    if (norm > 1.0 + 1e-12) {
      report.failures.push_back({FeatureIssue::row_norm_exceeds_one,
                                 "row " + std::to_string(s) + " has norm " + std::to_string(norm)});
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi);
  const auto& sv = svd.singularValues();
  const double smallest = phi.rows() >= phi.cols() ? sv(sv.size() - 1) : 0.0;
  if (!(smallest > 1e-10)) {
    report.failures.push_back({FeatureIssue::rank_deficient,
                               "smallest singular value " + std::to_string(smallest) + " <= 1e-10"});
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(phi.rows());
  const Eigen::VectorXd u = phi.colPivHouseholderQr().solve(ones);
  const double residual = (phi * u - ones).norm();
  if (!(residual > 1e-10)) {
    report.failures.push_back({FeatureIssue::represents_constant,
                               "all-ones vector lies in the feature span (residual " +
                                   std::to_string(residual) + ")"});
  }
  return report;
}

/// Continuing trajectory through a tabular MDP, expressed in feature space.
/// Holds references: the MDP, policy and features must outlive the source.
class TabularSource {
 public:
  TabularSource(const MultiAgentMdp& mdp, const JointPolicy& policy, const FeatureMap& features,
                std::uint64_t seed, std::size_t initial_state = 0)
      : mdp_(mdp), policy_(policy), features_(features), rng_(seed), state_(initial_state) {
    check_compatible(mdp, policy);
    if (features.num_states() != mdp.num_states()) throw ConfigError("feature/MDP state count mismatch");
    if (initial_state >= mdp.num_states()) throw ConfigError("initial state out of range");
    sample_.rewards.resize(static_cast<Eigen::Index>(mdp.num_agents()));
  }

  std::size_t num_agents() const { return mdp_.num_agents(); }
  std::size_t feature_dim() const { return features_.dim(); }
  std::size_t state() const { return state_; }
  const Transition& last_transition() const { return last_; }

  const Sample& next() {
    last_ = sample_step(mdp_, policy_, state_, rng_);
    sample_.phi = features_.row(last_.state).transpose();
    sample_.phi_next = features_.row(last_.next_state).transpose();
    for (std::size_t i = 0; i < last_.rewards.size(); ++i) {
      sample_.rewards(static_cast<Eigen::Index>(i)) = last_.rewards[i];
    }
    state_ = last_.next_state;
    return sample_;
  }

 private:
  const MultiAgentMdp& mdp_;
  const JointPolicy& policy_;
  const FeatureMap& features_;
  Rng rng_;
  std::size_t state_;
  Transition last_;
  Sample sample_;
};

}  // namespace dtd
