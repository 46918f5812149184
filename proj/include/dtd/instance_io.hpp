#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dtd/error.hpp"
#include "dtd/model.hpp"
#include "dtd/synthetic.hpp"
#include "dtd/topology.hpp"

namespace dtd {

using Instance = SyntheticInstance;

inline constexpr int kInstanceFormatVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ConfigError("instance: " + what + " has inconsistent dimensions");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return m;
}

}  // namespace detail

/// Row-major tensors, edge list plus weighting scheme for the topology. The
/// consensus matrix is rebuilt on load rather than stored.
inline nlohmann::json instance_to_json(const Instance& inst) {
  using nlohmann::json;
  const auto& mdp = inst.mdp;
  json policy = json::array();
  for (const auto& t : inst.policy.tables()) policy.push_back(detail::matrix_to_json(t));
  json edges = json::array();
  for (auto [a, b] : inst.graph.edges()) edges.push_back({a, b});
  json out;
  out["format"] = "dtd-instance";
  out["version"] = kInstanceFormatVersion;
  out["seed"] = mdp.seed ? json(*mdp.seed) : json(nullptr);
  out["mdp"] = {{"mode", mdp.is_factored() ? "factored" : "dense"},
                {"num_states", mdp.num_states()},
                {"actions_per_agent", mdp.actions_per_agent()},
                {"noise_half_width", mdp.noise_half_width()},
                {"r_max", mdp.r_max()},
                {"transition", detail::matrix_to_json(mdp.transition())},
                {"rewards", detail::matrix_to_json(mdp.rewards())}};
  out["policy"] = std::move(policy);
  out["features"] = detail::matrix_to_json(inst.features.matrix());
  out["topology"] = {{"num_nodes", inst.graph.num_nodes()},
                     {"edges", std::move(edges)},
                     {"scheme", to_string(inst.consensus_spec.scheme)},
                     {"self_weight", inst.consensus_spec.self_weight},
                     {"neighbor_weight", inst.consensus_spec.neighbor_weight}};
  return out;
}

inline Instance instance_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "dtd-instance") throw ConfigError("instance: unknown format tag");
    if (j.at("version").get<int>() != kInstanceFormatVersion) throw ConfigError("instance: unsupported version");
    const auto& m = j.at("mdp");
    const auto mode = m.at("mode").get<std::string>();
    if (mode != "factored" && mode != "dense") throw ConfigError("instance: mdp.mode must be factored or dense");
    auto transition = detail::matrix_from_json(m.at("transition"), "mdp.transition");
    auto rewards = detail::matrix_from_json(m.at("rewards"), "mdp.rewards");
    auto actions = m.at("actions_per_agent").get<std::vector<int>>();
    const double noise = m.at("noise_half_width").get<double>();
    const double r_max = m.at("r_max").get<double>();
    auto mdp = mode == "factored" ? MultiAgentMdp::factored(std::move(transition), std::move(rewards), actions, noise, r_max)
                                  : MultiAgentMdp::dense(std::move(transition), std::move(rewards), actions, noise, r_max);
    if (m.at("num_states").get<std::size_t>() != mdp.num_states()) {
      throw ConfigError("instance: mdp.num_states disagrees with the transition table");
    }
    if (j.contains("seed") && !j.at("seed").is_null()) mdp.seed = j.at("seed").get<std::uint64_t>();

    std::vector<Eigen::MatrixXd> tables;
    for (const auto& t : j.at("policy")) tables.push_back(detail::matrix_from_json(t, "policy"));
    JointPolicy policy(std::move(tables));
    FeatureMap features(detail::matrix_from_json(j.at("features"), "features"));

    const auto& t = j.at("topology");
    std::vector<Graph::Edge> edges;
    for (const auto& e : t.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw ConfigError("instance: edges must be [a, b] pairs");
      edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    Graph graph(t.at("num_nodes").get<std::size_t>(), std::move(edges));
    ConsensusSpec cs;
    cs.scheme = consensus_scheme_from_string(t.at("scheme").get<std::string>());
    cs.self_weight = t.value("self_weight", cs.self_weight);
    cs.neighbor_weight = t.value("neighbor_weight", cs.neighbor_weight);
    auto consensus = consensus_matrix(graph, cs);
    if (graph.num_nodes() != mdp.num_agents()) throw ConfigError("instance: topology size differs from agent count");
    check_compatible(mdp, policy);
    if (features.num_states() != mdp.num_states()) throw ConfigError("instance: feature rows differ from state count");
    return Instance{std::move(mdp), std::move(policy), std::move(features), std::move(graph), std::move(consensus), cs};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("instance: ") + e.what());
  }
}

inline void save_instance(const Instance& inst, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << instance_to_json(inst).dump(1) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

inline Instance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return instance_from_json(j);
}

}  // namespace dtd
