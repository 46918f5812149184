#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dtd/algorithms.hpp"
#include "dtd/error.hpp"
#include "dtd/metrics.hpp"
#include "dtd/navigation.hpp"
#include "dtd/synthetic.hpp"
#include "dtd/topology.hpp"

namespace dtd {

enum class ModelKind { synthetic, navigation, instance };

inline const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::synthetic: return "synthetic";
    case ModelKind::navigation: return "navigation";
    case ModelKind::instance: return "instance";
  }
  return "unknown";
}

/// Initial (w, mu) for every agent: constants plus optional per-agent uniform
/// perturbations of the given half-widths.
struct InitSpec {
  double w = 0.0;
  double mu = 0.0;
  double w_spread = 0.0;
  double mu_spread = 0.0;

  bool is_zero() const { return w == 0.0 && mu == 0.0 && w_spread == 0.0 && mu_spread == 0.0; }
};

struct AlgorithmConfig {
  std::string name;
  Algorithm kind = Algorithm::local_td;
  double beta = 0.005;
  std::size_t K = 1;
  std::size_t L = 1;
  std::size_t M = 1;
  InitSpec init;

  RunConfig run_config() const {
    RunConfig c;
    c.algorithm = kind;
    c.beta = beta;
    c.K = K;
    c.L = L;
    c.M = M;
    return c;
  }
  std::size_t period() const { return run_config().period(); }
  std::size_t samples() const { return period() * L; }
};

/// Grid over local steps K and batch sizes M at a fixed sample budget; every
/// point gets L = samples / period.
struct SweepConfig {
  std::size_t samples = 10000;
  double local_beta = 0.005;
  std::vector<std::size_t> K;
  double batching_beta = 0.1;
  std::vector<std::size_t> M;
  InitSpec init;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::size_t trials = 10;
  std::uint64_t master_seed = 0;
  std::filesystem::path output_dir = "results";
  std::size_t threads = 0;  // 0: hardware concurrency
  std::vector<Metric> metrics{Metric::objective_error, Metric::msbe, Metric::consensus_error, Metric::q_norm};

  ModelKind model = ModelKind::synthetic;
  SyntheticSpec synthetic;
  NavigationSpec navigation;
  std::filesystem::path instance_path;
  TopologySpec topology;

  std::vector<AlgorithmConfig> algorithms;
  std::optional<SweepConfig> sweep;

  bool wants(Metric m) const { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); }
};

/// Default communication graph per model family.
inline TopologySpec default_topology(ModelKind model) {
  if (model == ModelKind::navigation) {
    return {GraphSpec{GraphKind::erdos_renyi, 4, 0.5}, ConsensusSpec{ConsensusScheme::metropolis, 0.4, 0.3}};
  }
  return {};
}

inline std::vector<AlgorithmConfig> expand_sweep(const SweepConfig& sw) {
  if (sw.samples < 1) throw ConfigError("sweep: samples must be >= 1");
  std::vector<AlgorithmConfig> out;
  auto add = [&](Algorithm kind, std::size_t p, double beta) {
    if (p < 1 || sw.samples % p != 0) {
      throw ConfigError("sweep: " + std::string(to_string(kind)) + " period " + std::to_string(p) +
                        " does not divide the sample budget " + std::to_string(sw.samples));
    }
    AlgorithmConfig a;
    a.kind = kind;
    a.beta = beta;
    a.L = sw.samples / p;
    a.init = sw.init;
    if (kind == Algorithm::batching) {
      a.M = p;
      a.name = "batching_M" + std::to_string(p);
    } else {
      a.K = p;
      a.name = "local_K" + std::to_string(p);
    }
    out.push_back(a);
  };
  for (auto k : sw.K) add(Algorithm::local_td, k, sw.local_beta);
  for (auto m : sw.M) add(Algorithm::batching, m, sw.batching_beta);
  return out;
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.name.empty()) throw ConfigError("config: name must not be empty");
  if (cfg.trials < 1) throw ConfigError("config: trials must be >= 1");
  if (cfg.algorithms.empty()) throw ConfigError("config: at least one algorithm (or a sweep) is required");
  std::set<std::string> names;
  for (const auto& a : cfg.algorithms) {
    if (a.name.empty()) throw ConfigError("config: algorithm without a name");
    if (a.name.find_first_of("/\\ ") != std::string::npos) {
      throw ConfigError("config: algorithm name '" + a.name + "' must not contain slashes or spaces");
    }
    if (a.name == "comparison") throw ConfigError("config: algorithm name 'comparison' is reserved");
    if (!names.insert(a.name).second) throw ConfigError("config: duplicate algorithm name '" + a.name + "'");
    if (!(a.beta > 0.0)) throw ConfigError("config: " + a.name + ": beta must be > 0");
    if (a.K < 1 || a.L < 1 || a.M < 1) throw ConfigError("config: " + a.name + ": K, L and M must be >= 1");
    if (a.kind == Algorithm::vanilla && a.K != 1) throw ConfigError("config: " + a.name + ": vanilla requires K = 1");
    if (a.init.w_spread < 0.0 || a.init.mu_spread < 0.0) {
      throw ConfigError("config: " + a.name + ": init spreads must be >= 0");
    }
  }
  if (cfg.model == ModelKind::synthetic) validate_spec(cfg.synthetic);
  if (cfg.model == ModelKind::navigation) validate(cfg.navigation);
  if (cfg.model == ModelKind::instance && cfg.instance_path.empty()) throw ConfigError("config: model.path is required");
  if (cfg.wants(Metric::objective_error) && cfg.model == ModelKind::navigation) {
    throw UnsupportedMetric("config: objective_error needs a tabular fixed point; the navigation model has none");
  }
}

namespace detail {

class Node {
 public:
  Node(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const YAML::Node& raw() const { return node_; }

  void require_map(std::initializer_list<const char*> allowed) const {
    if (!node_.IsMap()) throw ConfigError(where() + "expected a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        throw ConfigError(where() + "unknown key '" + key + "'");
      }
    }
  }

  bool has(const char* key) const { return node_[key].IsDefined() && !node_[key].IsNull(); }
  Node child(const char* key) const { return {node_[key], path_.empty() ? key : path_ + "." + key}; }

  template <class T>
  T as() const {
    try {
      return node_.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where() + "invalid value");
    }
  }

  template <class T>
  void read(const char* key, T& out) const {
    if (has(key)) out = child(key).as<T>();
  }

  std::size_t read_count(const char* key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    const auto v = child(key).as<long long>();
    if (v < 0) throw ConfigError(child(key).where() + "must be >= 0");
    return static_cast<std::size_t>(v);
  }

  std::string where() const { return "config: " + (path_.empty() ? std::string("<root>") : path_) + ": "; }

 private:
  YAML::Node node_;
  std::string path_;
};

inline InitSpec parse_init(const Node& n) {
  n.require_map({"w", "mu", "w_spread", "mu_spread"});
  InitSpec s;
  n.read("w", s.w);
  n.read("mu", s.mu);
  n.read("w_spread", s.w_spread);
  n.read("mu_spread", s.mu_spread);
  return s;
}

inline std::vector<std::size_t> parse_counts(const Node& n) {
  if (!n.raw().IsSequence()) throw ConfigError(n.where() + "expected a list");
  std::vector<std::size_t> out;
  for (const auto& v : n.raw()) {
    long long x = 0;
    try {
      x = v.as<long long>();
    } catch (const YAML::Exception&) {
      throw ConfigError(n.where() + "expected integers");
    }
    if (x < 1) throw ConfigError(n.where() + "entries must be >= 1");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

inline TopologySpec parse_topology(const Node& n, TopologySpec t) {
  n.require_map({"graph", "k", "p", "weights", "self_weight", "neighbor_weight"});
  if (n.has("graph")) t.graph.kind = graph_kind_from_string(n.child("graph").as<std::string>());
  t.graph.k = n.read_count("k", t.graph.k);
  n.read("p", t.graph.p);
  if (n.has("weights")) t.consensus.scheme = consensus_scheme_from_string(n.child("weights").as<std::string>());
  n.read("self_weight", t.consensus.self_weight);
  n.read("neighbor_weight", t.consensus.neighbor_weight);
  return t;
}

inline AlgorithmConfig parse_algorithm(const Node& n) {
  n.require_map({"name", "kind", "beta", "K", "L", "M", "init"});
  AlgorithmConfig a;
  if (!n.has("kind")) throw ConfigError(n.where() + "missing 'kind'");
  a.kind = algorithm_from_string(n.child("kind").as<std::string>());
  a.name = to_string(a.kind);
  n.read("name", a.name);
  n.read("beta", a.beta);
  a.K = n.read_count("K", a.K);
  a.L = n.read_count("L", a.L);
  a.M = n.read_count("M", a.M);
  if (n.has("init")) a.init = parse_init(n.child("init"));
  return a;
}

}  // namespace detail

/// Parses and validates an experiment description. Unknown keys anywhere are
/// rejected.
inline ExperimentConfig parse_config(const std::string& text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const detail::Node root(doc, "");
  root.require_map({"name", "trials", "master_seed", "output_dir", "threads", "metrics", "model", "topology",
                    "algorithms", "sweep"});
  ExperimentConfig cfg;
  root.read("name", cfg.name);
  cfg.trials = root.read_count("trials", cfg.trials);
  root.read("master_seed", cfg.master_seed);
  if (root.has("output_dir")) cfg.output_dir = root.child("output_dir").as<std::string>();
  cfg.threads = root.read_count("threads", cfg.threads);
  if (root.has("metrics")) {
    const auto list = root.child("metrics").as<std::vector<std::string>>();
    cfg.metrics.clear();
    for (const auto& m : list) cfg.metrics.push_back(metric_from_string(m));
  }

  if (!root.has("model")) throw ConfigError("config: missing 'model' section");
  const auto model = root.child("model");
  model.require_map({"kind", "agents", "states", "features", "actions", "reward_low", "reward_high", "noise", "grid",
                     "landmarks", "collision_penalty", "r_max", "path"});
  const auto kind = model.has("kind") ? model.child("kind").as<std::string>() : std::string("synthetic");
  auto only = [&](std::initializer_list<const char*> keys) {
    for (const auto& kv : model.raw()) {
      const auto key = kv.first.as<std::string>();
      if (key != "kind" && std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
        throw ConfigError("config: model: key '" + key + "' does not apply to model kind '" + kind + "'");
      }
    }
  };
  if (kind == "synthetic") {
    only({"agents", "states", "features", "actions", "reward_low", "reward_high", "noise"});
    cfg.model = ModelKind::synthetic;
    auto& s = cfg.synthetic;
    s.num_agents = model.read_count("agents", s.num_agents);
    s.num_states = model.read_count("states", s.num_states);
    s.feature_dim = model.read_count("features", s.feature_dim);
    s.actions_per_agent = static_cast<int>(model.read_count("actions", static_cast<std::size_t>(s.actions_per_agent)));
    model.read("reward_low", s.reward_lo);
    model.read("reward_high", s.reward_hi);
    model.read("noise", s.noise_half_width);
  } else if (kind == "navigation") {
    only({"agents", "landmarks", "grid", "collision_penalty", "r_max"});
    cfg.model = ModelKind::navigation;
    auto& s = cfg.navigation;
    s.num_agents = model.read_count("agents", s.num_agents);
    s.num_landmarks = model.read_count("landmarks", s.num_landmarks);
    s.grid = static_cast<int>(model.read_count("grid", static_cast<std::size_t>(s.grid)));
    model.read("collision_penalty", s.collision_penalty);
    model.read("r_max", s.r_max);
  } else if (kind == "instance") {
    only({"path"});
    cfg.model = ModelKind::instance;
    if (model.has("path")) cfg.instance_path = model.child("path").as<std::string>();
  } else {
    throw ConfigError("config: model.kind must be synthetic, navigation or instance");
  }

  cfg.topology = default_topology(cfg.model);
  if (root.has("topology")) {
    if (cfg.model == ModelKind::instance) {
      throw ConfigError("config: topology comes from the instance file; remove the topology section");
    }
    cfg.topology = detail::parse_topology(root.child("topology"), cfg.topology);
  }
  cfg.synthetic.topology = cfg.topology;

  if (root.has("algorithms")) {
    const auto algs = root.child("algorithms");
    if (!algs.raw().IsSequence()) throw ConfigError("config: algorithms must be a list");
    std::size_t idx = 0;
    for (const auto& a : algs.raw()) {
      cfg.algorithms.push_back(detail::parse_algorithm({a, "algorithms[" + std::to_string(idx++) + "]"}));
    }
  }
  if (root.has("sweep")) {
    const auto sw = root.child("sweep");
    sw.require_map({"samples", "local_beta", "K", "batching_beta", "M", "init"});
    SweepConfig s;
    s.samples = sw.read_count("samples", s.samples);
    sw.read("local_beta", s.local_beta);
    sw.read("batching_beta", s.batching_beta);
    if (sw.has("K")) s.K = detail::parse_counts(sw.child("K"));
    if (sw.has("M")) s.M = detail::parse_counts(sw.child("M"));
    if (sw.has("init")) s.init = detail::parse_init(sw.child("init"));
    if (s.K.empty() && s.M.empty()) throw ConfigError("config: sweep needs K and/or M values");
    for (auto& a : expand_sweep(s)) cfg.algorithms.push_back(std::move(a));
    cfg.sweep = std::move(s);
  }
  validate(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open config");
  std::ostringstream text;
  text << in.rdbuf();
  auto cfg = parse_config(text.str());
  if (cfg.model == ModelKind::instance && cfg.instance_path.is_relative()) {
    cfg.instance_path = path.parent_path() / cfg.instance_path;
  }
  return cfg;
}

}  // namespace dtd
