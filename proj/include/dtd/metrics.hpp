#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "dtd/error.hpp"

// Parameter sets are n x N matrices with one column per agent.

namespace dtd {

/// Raised when a metric needs information the environment cannot provide
/// (e.g. the tabular fixed point of the navigation task).
class UnsupportedMetric : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// sqrt(sum_i ||w^i - w*||^2) / (n N).
inline double objective_error(const Eigen::MatrixXd& params, const Eigen::VectorXd& w_star) {
  if (w_star.size() == 0) throw UnsupportedMetric("objective error needs a tabular fixed point");
  if (w_star.size() != params.rows()) throw ConfigError("objective_error: dimension mismatch");
  const double n = static_cast<double>(params.rows());
  const double N = static_cast<double>(params.cols());
  return std::sqrt((params.colwise() - w_star).squaredNorm()) / (n * N);
}

/// Squared Bellman error of one sample, averaged over agents. Uses the
/// agent-mean reward and tracker: an evaluator-only view.
inline double sbe(const Eigen::MatrixXd& params, const Eigen::VectorXd& phi, const Eigen::VectorXd& phi_next,
                  double mean_reward, double mean_tracker) {
  const Eigen::VectorXd residual =
      (params.transpose() * (phi - phi_next)).array() + (mean_tracker - mean_reward);
  return residual.squaredNorm() / static_cast<double>(params.cols());
}

/// Incremental mean: m_k = m_{k-1} + (x - m_{k-1}) / k.
inline double msbe_update(double running_mean, std::size_t k, double value) {
  if (k < 1) throw ConfigError("msbe_update: k must be >= 1");
  return running_mean + (value - running_mean) / static_cast<double>(k);
}

class RunningMsbe {
 public:
  void add(double value) {
    ++count_;
    mean_ = msbe_update(mean_, count_, value);
  }
  double value() const { return count_ == 0 ? std::numeric_limits<double>::quiet_NaN() : mean_; }
  std::size_t count() const { return count_; }

 private:
  double mean_ = 0.0;
  std::size_t count_ = 0;
};

/// Deviation matrix Q = [w^1 - wbar, ..., w^N - wbar].
inline Eigen::MatrixXd deviation_matrix(const Eigen::MatrixXd& params) {
  return params.colwise() - params.rowwise().mean();
}

/// (1/N) sum_i ||w^i - wbar||^2.
inline double consensus_error(const Eigen::MatrixXd& params) {
  return deviation_matrix(params).squaredNorm() / static_cast<double>(params.cols());
}

/// Spectral norm of the deviation matrix.
inline double q_norm(const Eigen::MatrixXd& params) {
  const Eigen::MatrixXd q = deviation_matrix(params);
  if (q.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(q);
  return svd.singularValues()(0);
}

/// One CSV line. NaN marks a metric that was not computed.
struct MetricsRow {
  long long trial = 0;
  std::size_t comm_round = 0;
  std::size_t samples = 0;
  double objective_error = std::numeric_limits<double>::quiet_NaN();
  double msbe = std::numeric_limits<double>::quiet_NaN();
  double consensus_error = std::numeric_limits<double>::quiet_NaN();
  double q_norm = std::numeric_limits<double>::quiet_NaN();
};

enum class Metric { objective_error, msbe, consensus_error, q_norm };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::objective_error: return "objective_error";
    case Metric::msbe: return "msbe";
    case Metric::consensus_error: return "consensus_error";
    case Metric::q_norm: return "q_norm";
  }
  return "unknown";
}

inline Metric metric_from_string(const std::string& s) {
  if (s == "objective_error") return Metric::objective_error;
  if (s == "msbe") return Metric::msbe;
  if (s == "consensus_error") return Metric::consensus_error;
  if (s == "q_norm") return Metric::q_norm;
  throw ConfigError("unknown metric '" + s + "'");
}

inline double metric_value(const MetricsRow& row, Metric m) {
  switch (m) {
    case Metric::objective_error: return row.objective_error;
    case Metric::msbe: return row.msbe;
    case Metric::consensus_error: return row.consensus_error;
    case Metric::q_norm: return row.q_norm;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace dtd
