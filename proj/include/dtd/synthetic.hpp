#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "dtd/error.hpp"
#include "dtd/fixedpoint.hpp"
#include "dtd/model.hpp"
#include "dtd/rng.hpp"
#include "dtd/topology.hpp"

namespace dtd {

struct TopologySpec {
  GraphSpec graph{GraphKind::ring, 4, 0.5};
  ConsensusSpec consensus{ConsensusScheme::circulant, 0.4, 0.3};
};

/// Random tabular instance family: state-only transitions with U[0,1] entries
/// normalized per row, per-agent state rewards U[reward_lo, reward_hi], unit
/// norm U[0,1] features, uniform product policy.
struct SyntheticSpec {
  std::size_t num_agents = 20;
  std::size_t num_states = 10;
  std::size_t feature_dim = 5;
  int actions_per_agent = 2;
  double reward_lo = 0.0;
  double reward_hi = 4.0;
  double noise_half_width = 0.5;
  TopologySpec topology;

  /// Uniform bound on realized rewards.
  double r_max() const { return std::max(std::abs(reward_lo), std::abs(reward_hi)) + noise_half_width; }
};

struct SyntheticInstance {
  MultiAgentMdp mdp;
  JointPolicy policy;
  FeatureMap features;
  Graph graph;
  ConsensusMatrix consensus;
  ConsensusSpec consensus_spec;
};

inline constexpr int kMaxFeatureResamples = 100;

/// Unit-norm rows with U[0,1] entries, redrawn until the feature checks pass.
inline FeatureMap random_features(std::size_t num_states, std::size_t dim, Rng& rng) {
  for (int attempt = 0; attempt < kMaxFeatureResamples; ++attempt) {
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(num_states), static_cast<Eigen::Index>(dim));
    for (Eigen::Index s = 0; s < phi.rows(); ++s) {
      for (Eigen::Index j = 0; j < phi.cols(); ++j) phi(s, j) = rng.uniform01();
      const double norm = phi.row(s).norm();
      if (norm > 0.0) phi.row(s) /= norm;
    }
    FeatureMap fm(std::move(phi));
    if (validate_features(fm).ok()) return fm;
  }
  throw GenerationError("random_features: no valid feature matrix after " + std::to_string(kMaxFeatureResamples) +
                        " attempts");
}

inline void validate_spec(const SyntheticSpec& spec) {
  if (spec.num_agents < 1 || spec.num_states < 2 || spec.feature_dim < 1 || spec.actions_per_agent < 1) {
    throw ConfigError("synthetic spec: agents, actions >= 1, states >= 2, feature_dim >= 1 required");
  }
  if (spec.feature_dim >= spec.num_states) throw ConfigError("synthetic spec: feature_dim must be below num_states");
  if (!(spec.reward_hi >= spec.reward_lo)) throw ConfigError("synthetic spec: reward_hi < reward_lo");
  if (!(spec.noise_half_width >= 0.0)) throw ConfigError("synthetic spec: negative noise half-width");
}

/// Draw order: transitions, rewards, features, graph.
inline SyntheticInstance gen_synthetic(const SyntheticSpec& spec, Rng& rng) {
  validate_spec(spec);
  const auto S = static_cast<Eigen::Index>(spec.num_states);
  const auto N = static_cast<Eigen::Index>(spec.num_agents);
  Eigen::MatrixXd transition(S, S);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index t = 0; t < S; ++t) transition(s, t) = rng.uniform01();
    transition.row(s) /= transition.row(s).sum();
  }
  Eigen::MatrixXd rewards(N, S);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index s = 0; s < S; ++s) rewards(i, s) = rng.uniform(spec.reward_lo, spec.reward_hi);
  }
  std::vector<int> actions(spec.num_agents, spec.actions_per_agent);
  auto mdp = MultiAgentMdp::factored(std::move(transition), std::move(rewards), actions, spec.noise_half_width,
                                     spec.r_max());
  if (!check_ergodic(mdp.transition()).ok()) {
    throw GenerationError("gen_synthetic: sampled chain is not irreducible and aperiodic");
  }
  auto policy = JointPolicy::uniform(spec.num_states, actions);
  auto features = random_features(spec.num_states, spec.feature_dim, rng);
  auto graph = build_graph(spec.topology.graph, spec.num_agents, rng);
  auto consensus = consensus_matrix(graph, spec.topology.consensus);
  return SyntheticInstance{std::move(mdp), std::move(policy), std::move(features), std::move(graph),
                           std::move(consensus), spec.topology.consensus};
}

}  // namespace dtd
