#pragma once

#include <Eigen/Dense>

#include <concepts>
#include <cstddef>
#include <vector>

#include "dtd/error.hpp"

namespace dtd {

/// One observed transition as the learners see it: features of the current
/// and next state plus every agent's realized reward. Agent i only ever reads
/// rewards[i]; the full vector is there for evaluators.
struct Sample {
  Eigen::VectorXd phi;
  Eigen::VectorXd phi_next;
  Eigen::VectorXd rewards;
};

/// Anything that produces a continuing trajectory of samples. `next()` returns
/// a reference valid until the following call.
template <class S>
concept SampleSource = requires(S& s, const S& cs) {
  { cs.num_agents() } -> std::convertible_to<std::size_t>;
  { cs.feature_dim() } -> std::convertible_to<std::size_t>;
  { s.next() } -> std::same_as<const Sample&>;
};

/// Plays back a recorded trajectory.
class ReplaySource {
 public:
  explicit ReplaySource(std::vector<Sample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw ConfigError("replay source needs at least one sample");
  }

  std::size_t num_agents() const { return static_cast<std::size_t>(samples_.front().rewards.size()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(samples_.front().phi.size()); }
  std::size_t size() const { return samples_.size(); }

  const Sample& next() {
    if (pos_ >= samples_.size()) throw ConfigError("replay source exhausted");
    return samples_[pos_++];
  }

 private:
  std::vector<Sample> samples_;
  std::size_t pos_ = 0;
};

/// Wraps another source and keeps a copy of everything it hands out.
template <SampleSource Inner>
class RecordingSource {
 public:
  explicit RecordingSource(Inner& inner) : inner_(inner) {}

  std::size_t num_agents() const { return inner_.num_agents(); }
  std::size_t feature_dim() const { return inner_.feature_dim(); }

  const Sample& next() {
    recorded_.push_back(inner_.next());
    return recorded_.back();
  }

  const std::vector<Sample>& recorded() const { return recorded_; }
  std::vector<Sample> take() { return std::move(recorded_); }

 private:
  Inner& inner_;
  std::vector<Sample> recorded_;
};

/// Streams another source with the rewards replaced by their agent mean, as a
/// one-agent source.
template <SampleSource Inner>
class MeanRewardSource {
 public:
  explicit MeanRewardSource(Inner& inner) : inner_(inner) { sample_.rewards.resize(1); }

  std::size_t num_agents() const { return 1; }
  std::size_t feature_dim() const { return inner_.feature_dim(); }

  const Sample& next() {
    const Sample& s = inner_.next();
    sample_.phi = s.phi;
    sample_.phi_next = s.phi_next;
    sample_.rewards(0) = s.rewards.mean();
    return sample_;
  }

 private:
  Inner& inner_;
  Sample sample_;
};

/// Collapses per-agent rewards into their mean: the reward signal driving the
/// agent-average dynamics.
inline std::vector<Sample> mean_reward_stream(const std::vector<Sample>& samples) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Sample m{s.phi, s.phi_next, Eigen::VectorXd::Constant(1, s.rewards.mean())};
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace dtd
