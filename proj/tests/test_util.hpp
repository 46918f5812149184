#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "dtd/dtd.hpp"

namespace dtd::testing {

/// Default synthetic instance (N=20, |S|=10, n=5, ring 0.4/0.3).
inline Instance default_instance(std::uint64_t seed, SyntheticSpec spec = {}) {
  Rng rng(seed);
  auto inst = gen_synthetic(spec, rng);
  inst.mdp.seed = seed;
  return inst;
}

/// Two-state chain [[0.9, 0.1], [0.2, 0.8]] with one action per agent.
inline Eigen::MatrixXd two_state_chain() {
  Eigen::MatrixXd p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  return p;
}

/// Small instance with a complete graph: N agents, |S| states, n features.
inline Instance small_instance(std::uint64_t seed, std::size_t agents, GraphKind graph = GraphKind::complete,
                               ConsensusScheme scheme = ConsensusScheme::metropolis, std::size_t states = 6,
                               std::size_t features = 3) {
  SyntheticSpec spec;
  spec.num_agents = agents;
  spec.num_states = states;
  spec.feature_dim = features;
  spec.topology.graph.kind = graph;
  spec.topology.consensus.scheme = scheme;
  return default_instance(seed, spec);
}

inline std::vector<Sample> record(const Instance& inst, std::uint64_t seed, std::size_t steps) {
  TabularSource src(inst.mdp, inst.policy, inst.features, seed);
  std::vector<Sample> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) out.push_back(src.next());
  return out;
}

}  // namespace dtd::testing
