#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dtd/error.hpp"
#include "dtd/rng.hpp"
#include "dtd/source.hpp"

namespace dtd {

/// Grid-world cooperative navigation: agents random-walk on a G x G grid and
/// are rewarded for proximity to the nearest landmark, penalized for sharing a
/// cell with another agent.
struct NavigationSpec {
  int grid = 10;
  std::size_t num_agents = 9;
  std::size_t num_landmarks = 9;
  double collision_penalty = 1.0;
  double r_max = 2.0;

  /// Agent positions (2N) and nearest-landmark offsets (2N).
  std::size_t feature_dim() const { return 4 * num_agents; }
};

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct NavState {
  std::vector<Cell> agents;
  std::vector<Cell> landmarks;
};

enum NavAction : int { stay = 0, left = 1, right = 2, down = 3, up = 4 };
inline constexpr int kNavActions = 5;

inline void validate(const NavigationSpec& spec) {
  if (spec.grid < 2) throw ConfigError("navigation: grid must be at least 2x2");
  if (spec.num_agents < 1 || spec.num_landmarks < 1) throw ConfigError("navigation: need agents and landmarks");
  if (!(spec.collision_penalty >= 0.0) || !(spec.r_max > 0.0)) {
    throw ConfigError("navigation: penalty must be >= 0 and r_max > 0");
  }
}

inline NavState random_nav_state(const NavigationSpec& spec, Rng& rng) {
  validate(spec);
  const auto g = static_cast<std::uint64_t>(spec.grid);
  NavState st;
  for (std::size_t i = 0; i < spec.num_landmarks; ++i) {
    st.landmarks.push_back({static_cast<int>(rng.below(g)), static_cast<int>(rng.below(g))});
  }
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    st.agents.push_back({static_cast<int>(rng.below(g)), static_cast<int>(rng.below(g))});
  }
  return st;
}

inline std::size_t nearest_landmark(const NavState& st, const Cell& c) {
  std::size_t best = 0;
  int best_dist = std::numeric_limits<int>::max();
  for (std::size_t j = 0; j < st.landmarks.size(); ++j) {
    const int d = std::abs(st.landmarks[j].x - c.x) + std::abs(st.landmarks[j].y - c.y);
    if (d < best_dist) {
      best_dist = d;
      best = j;
    }
  }
  return best;
}

struct NavStep {
  NavState next;
  Eigen::VectorXd rewards;
};

/// Moves every agent one cell (clamped at the walls), then scores:
/// r_i = -(Manhattan distance to nearest landmark)/G - penalty * [cell shared],
/// clipped to [-r_max, 0].
inline NavStep nav_step(const NavigationSpec& spec, const NavState& state, const std::vector<int>& actions) {
  if (actions.size() != state.agents.size()) throw ConfigError("nav_step: one action per agent required");
  NavStep out{state, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(state.agents.size()))};
  const int hi = spec.grid - 1;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    Cell& c = out.next.agents[i];
    switch (actions[i]) {
      case stay: break;
      case left: c.x = std::max(0, c.x - 1); break;
      case right: c.x = std::min(hi, c.x + 1); break;
      case down: c.y = std::max(0, c.y - 1); break;
      case up: c.y = std::min(hi, c.y + 1); break;
      default: throw ConfigError("nav_step: action out of range");
    }
  }
  const auto& agents = out.next.agents;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const Cell& lm = out.next.landmarks[nearest_landmark(out.next, agents[i])];
    const int dist = std::abs(lm.x - agents[i].x) + std::abs(lm.y - agents[i].y);
    double r = -static_cast<double>(dist) / static_cast<double>(spec.grid);
    for (std::size_t j = 0; j < agents.size(); ++j) {
      if (j != i && agents[j] == agents[i]) {
        r -= spec.collision_penalty;
        break;
      }
    }
    out.rewards(static_cast<Eigen::Index>(i)) = std::clamp(r, -spec.r_max, 0.0);
  }
  return out;
}

/// Unscaled encoding: [x_i/(G-1), y_i/(G-1)] for every agent, then the offset
/// to its nearest landmark [(lx-x_i)/(G-1), (ly-y_i)/(G-1)].
inline Eigen::VectorXd nav_features_raw(const NavigationSpec& spec, const NavState& st) {
  const double scale = 1.0 / static_cast<double>(spec.grid - 1);
  const auto N = static_cast<Eigen::Index>(st.agents.size());
  Eigen::VectorXd phi(4 * N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Cell& a = st.agents[static_cast<std::size_t>(i)];
    const Cell& lm = st.landmarks[nearest_landmark(st, a)];
    phi(2 * i) = a.x * scale;
    phi(2 * i + 1) = a.y * scale;
    phi(2 * N + 2 * i) = (lm.x - a.x) * scale;
    phi(2 * N + 2 * i + 1) = (lm.y - a.y) * scale;
  }
  return phi;
}

/// Raw encoding divided by its largest possible norm sqrt(4N), so ||phi|| <= 1.
inline Eigen::VectorXd nav_features(const NavigationSpec& spec, const NavState& st) {
  return nav_features_raw(spec, st) / std::sqrt(4.0 * static_cast<double>(st.agents.size()));
}

/// Uniform random policy over the five moves, as a continuing sample stream.
class NavigationSource {
 public:
  NavigationSource(NavigationSpec spec, NavState initial, std::uint64_t seed)
      : spec_(spec), state_(std::move(initial)), rng_(seed) {
    validate(spec_);
    if (state_.agents.size() != spec_.num_agents) throw ConfigError("navigation: state/agent count mismatch");
    phi_ = nav_features(spec_, state_);
  }

  std::size_t num_agents() const { return spec_.num_agents; }
  std::size_t feature_dim() const { return spec_.feature_dim(); }
  const NavState& state() const { return state_; }

  const Sample& next() {
    std::vector<int> actions(spec_.num_agents);
    for (auto& a : actions) a = static_cast<int>(rng_.below(kNavActions));
    auto step = nav_step(spec_, state_, actions);
    sample_.phi = phi_;
    state_ = std::move(step.next);
    phi_ = nav_features(spec_, state_);
    sample_.phi_next = phi_;
    sample_.rewards = std::move(step.rewards);
    return sample_;
  }

 private:
  NavigationSpec spec_;
  NavState state_;
  Rng rng_;
  Eigen::VectorXd phi_;
  Sample sample_;
};

}  // namespace dtd
