#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <vector>
#include <string>

#include "dtd/error.hpp"
#include "dtd/model.hpp"
#include "dtd/topology.hpp"

namespace dtd {

/// l2-induced matrix norm.
inline double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

namespace detail {

/// Boolean support of A*B, kept as 0/1 so repeated squaring never underflows.
inline Eigen::MatrixXd support_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return ((a * b).array() > 0.0).cast<double>().matrix();
}

inline Eigen::MatrixXd support_power(Eigen::MatrixXd base, std::size_t exponent) {
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(base.rows(), base.cols());
  while (exponent > 0) {
    if (exponent & 1U) result = support_product(result, base);
    exponent >>= 1U;
    if (exponent > 0) base = support_product(base, base);
  }
  return result;
}

}  // namespace detail

struct ErgodicityReport {
  bool irreducible = false;
  bool aperiodic = false;
  bool ok() const { return irreducible && aperiodic; }
};

/// Irreducibility via the lazy chain (P + I)/2 raised to |S|; primitivity via
/// P^((|S|-1)^2 + 1) (Wielandt's bound). Both on the support pattern only.
inline ErgodicityReport check_ergodic(const Eigen::MatrixXd& p) {
  const auto s = static_cast<std::size_t>(p.rows());
  const Eigen::MatrixXd pattern = (p.array() > 0.0).cast<double>().matrix();
  const Eigen::MatrixXd lazy =
      ((pattern + Eigen::MatrixXd::Identity(p.rows(), p.cols())).array() > 0.0).cast<double>().matrix();
  ErgodicityReport r;
  r.irreducible = (detail::support_power(lazy, s).array() > 0.0).all();
  r.aperiodic = r.irreducible && (detail::support_power(pattern, (s - 1) * (s - 1) + 1).array() > 0.0).all();
  return r;
}

/// Stationary distribution of an irreducible aperiodic chain via a dense solve
/// of (P^T - I) d = 0 with the normalization row replacing one equation.
inline Eigen::VectorXd steady_state(const Eigen::MatrixXd& p) {
  if (p.rows() != p.cols() || p.rows() == 0) throw ConfigError("steady_state: need a square non-empty matrix");
  if (!check_ergodic(p).ok()) {
    throw AssumptionViolation("ergodicity assumption violated: induced chain is not irreducible and aperiodic");
  }
  const auto S = p.rows();
  Eigen::MatrixXd system = p.transpose() - Eigen::MatrixXd::Identity(S, S);
  system.row(S - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S);
  rhs(S - 1) = 1.0;
  const auto lu = system.fullPivLu();
  Eigen::VectorXd d = lu.solve(rhs);
  // one step of iterative refinement
  d += lu.solve(rhs - system * d);
  return d;
}

/// Power-iteration stationary distribution; independent cross-check only.
inline Eigen::VectorXd steady_state_power(const Eigen::MatrixXd& p, std::size_t iterations = 100000,
                                          double tol = 1e-15) {
  Eigen::RowVectorXd d = Eigen::RowVectorXd::Constant(p.rows(), 1.0 / static_cast<double>(p.rows()));
  for (std::size_t it = 0; it < iterations; ++it) {
    Eigen::RowVectorXd next = d * p;
    next /= next.sum();
    const double delta = (next - d).cwiseAbs().maxCoeff();
    d = next;
    if (delta < tol) break;
  }
  return d.transpose();
}

/// Long-run average of the agent-mean reward.
inline double average_reward(const Eigen::VectorXd& d, const Eigen::VectorXd& mean_reward) {
  if (d.size() != mean_reward.size()) throw ConfigError("average_reward: size mismatch");
  return d.dot(mean_reward);
}

struct PsiB {
  Eigen::MatrixXd psi;
  Eigen::VectorXd b;
};

/// Exact steady-state expectations
///   Psi = E[phi(s) (phi(s') - phi(s))^T] = Phi^T D (P - I) Phi,
///   b   = E[phi(s) (rbar(s) - J)]        = Phi^T D (rbar - J 1).
/// The orientation of Psi is the one under which w* = -Psi^{-1} b is a fixed
/// point of the TD update w += beta * delta * phi(s).
inline PsiB compute_psi_b(const InducedChain& chain, const FeatureMap& features, const Eigen::VectorXd& d) {
  const auto S = static_cast<Eigen::Index>(chain.num_states());
  if (static_cast<Eigen::Index>(features.num_states()) != S || d.size() != S) {
    throw ConfigError("compute_psi_b: state count mismatch");
  }
  const auto& phi = features.matrix();
  const double j = average_reward(d, chain.mean_reward);
  const Eigen::MatrixXd expected_next = chain.transition * phi;  // row s: E[phi(s') | s]
  PsiB out;
  out.psi = phi.transpose() * d.asDiagonal() * (expected_next - phi);
  out.b = phi.transpose() * d.asDiagonal() * (chain.mean_reward - Eigen::VectorXd::Constant(S, j));
  return out;
}

inline Eigen::VectorXd solve_fixed_point(const Eigen::MatrixXd& psi, const Eigen::VectorXd& b) {
  if (psi.rows() != psi.cols() || psi.rows() != b.size()) throw ConfigError("solve_fixed_point: shape mismatch");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(psi);
  const double smallest = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smallest > 1e-12)) {
    throw NumericalError("solve_fixed_point: Psi is near-singular (smallest singular value " +
                         std::to_string(smallest) + ")");
  }
  const auto lu = psi.fullPivLu();
  Eigen::VectorXd w = lu.solve(-b);
  w += lu.solve(-b - psi * w);
  return w;
}

/// Everything exact about one policy-evaluation instance.
struct FixedPoint {
  Eigen::VectorXd d;
  double J_pi = 0.0;
  Eigen::MatrixXd psi;
  Eigen::VectorXd b;
  Eigen::VectorXd w_star;

  double stationarity_residual(const Eigen::MatrixXd& p) const {
    return (d.transpose() * p - d.transpose()).cwiseAbs().maxCoeff();
  }
  double fixed_point_residual() const { return (psi * w_star + b).cwiseAbs().maxCoeff(); }
  /// Largest eigenvalue of the symmetric part of Psi.
  double psi_symmetric_max_eigenvalue() const {
    const Eigen::MatrixXd sym = 0.5 * (psi + psi.transpose());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().maxCoeff();
  }
};

inline FixedPoint compute_fixed_point(const InducedChain& chain, const FeatureMap& features) {
  FixedPoint fp;
  fp.d = steady_state(chain.transition);
  fp.J_pi = average_reward(fp.d, chain.mean_reward);
  auto [psi, b] = compute_psi_b(chain, features, fp.d);
  fp.psi = std::move(psi);
  fp.b = std::move(b);
  fp.w_star = solve_fixed_point(fp.psi, fp.b);
  return fp;
}

inline constexpr std::size_t kDefaultMixingHorizon = 100000;

struct MixingTime {
  std::size_t tau = 0;
  bool capped = false;
};

/// Smallest k with ||Psi - E[phi(s_k)(phi(s_{k+1}) - phi(s_k))^T | s_0 = s]|| <= beta
/// for every start state s, using exact powers of P.
inline MixingTime mixing_time(const Eigen::MatrixXd& p, const FeatureMap& features, const Eigen::MatrixXd& psi,
                              double beta, std::size_t horizon = kDefaultMixingHorizon) {
  if (!(beta > 0.0)) throw ConfigError("mixing_time: beta must be > 0");
  const auto S = p.rows();
  const auto& phi = features.matrix();
  const auto n = phi.cols();
  const Eigen::MatrixXd drift = p * phi - phi;  // row j: E[phi(s')] - phi(j)
  // per-state outer products phi(j) drift(j)^T, stacked
  std::vector<Eigen::MatrixXd> local(static_cast<std::size_t>(S));
  for (Eigen::Index j = 0; j < S; ++j) {
    local[static_cast<std::size_t>(j)] = phi.row(j).transpose() * drift.row(j);
  }
  Eigen::MatrixXd dist = Eigen::MatrixXd::Identity(S, S);  // row s: law of s_k given s_0 = s
  Eigen::MatrixXd expectation(n, n);
  for (std::size_t k = 0; k <= horizon; ++k) {
    bool within = true;
    for (Eigen::Index s = 0; s < S && within; ++s) {
      expectation.setZero();
      for (Eigen::Index j = 0; j < S; ++j) {
        const double w = dist(s, j);
        if (w != 0.0) expectation.noalias() += w * local[static_cast<std::size_t>(j)];
      }
      within = spectral_norm(psi - expectation) <= beta;
    }
    if (within) return {k, false};
    dist = dist * p;
  }
  return {horizon, true};
}

inline MixingTime mixing_time(const InducedChain& chain, const FeatureMap& features, double beta,
                              std::size_t horizon = kDefaultMixingHorizon) {
  const auto d = steady_state(chain.transition);
  return mixing_time(chain.transition, features, compute_psi_b(chain, features, d).psi, beta, horizon);
}

struct ConsensusBoundInput {
  std::size_t N = 1;
  double eta = 1.0;
  double beta = 0.0;
  std::size_t K = 1;
  std::size_t L = 0;
  double r_max = 1.0;
  double q00_norm = 0.0;
};

struct ConsensusBound {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double rho = 0.0;
  double transient = 0.0;  // kappa1 rho^L ||Q_00||
  double floor = 0.0;      // kappa2 beta K / (1 - rho)
  double value = 0.0;
};

/// Deterministic bound on the spectral norm of the consensus deviation after L
/// rounds. Refuses (ConfigError) when the step-size condition fails.
inline ConsensusBound consensus_error_bound(const ConsensusBoundInput& in) {
  const auto cond = step_size_condition(in.beta, in.K, in.eta, in.N);
  if (!cond.ok) {
    char detail[96];
    std::snprintf(detail, sizeof detail, " violated (beta*K = %.6g, threshold = %.6g)",
                  in.beta * static_cast<double>(in.K), cond.threshold);
    throw ConfigError("consensus bound inapplicable: step-size condition beta*K <= min{1/2, eta^(N-1)/(4(1-eta^(N-1)))}" +
                      std::string(detail));
  }
  if (!(in.r_max > 0.0)) throw ConfigError("consensus_error_bound: r_max must be > 0");
  if (!(in.q00_norm >= 0.0)) throw ConfigError("consensus_error_bound: ||Q_00|| must be >= 0");
  const double N = static_cast<double>(in.N);
  const double eta_pow = std::pow(in.eta, N - 1.0);
  const double gap = 1.0 - eta_pow;
  const double bk = in.beta * static_cast<double>(in.K);
  ConsensusBound out;
  out.rho = cond.rho;
  out.kappa2 = 8.0 * (1.0 + 1.0 / eta_pow) * std::pow(N, 2.5) * in.r_max;
  if (gap <= 0.0) {
    // exact averaging: kappa1 is unbounded but rho = 0 zeroes the transient for L >= 1
    out.kappa1 = std::numeric_limits<double>::infinity();
    out.transient = in.L == 0 ? in.q00_norm : 0.0;
  } else {
    out.kappa1 = 2.0 * N * N * (1.0 + 1.0 / eta_pow) / gap;
    out.transient = out.kappa1 * std::pow(out.rho, static_cast<double>(in.L)) * in.q00_norm;
  }
  out.floor = out.kappa2 * bk / (1.0 - out.rho);
  out.value = out.transient + out.floor;
  return out;
}

struct LyapunovSolution {
  Eigen::MatrixXd U;
  double residual = 0.0;  // max-abs of A^T U + U A + I
};

/// Solves A^T U + U A + I = 0 through the Kronecker-vectorized system
/// (I kron A^T + A^T kron I) vec(U) = -vec(I). A must be Hurwitz.
inline LyapunovSolution solve_lyapunov(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ConfigError("solve_lyapunov: square matrix required");
  const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues();
  const double max_real = eig.real().maxCoeff();
  if (!(max_real < 0.0)) {
    throw AssumptionViolation("solve_lyapunov: matrix is not Hurwitz (max real eigenvalue " +
                              std::to_string(max_real) + ")");
  }
  const auto m = a.rows();
  const Eigen::MatrixXd at = a.transpose();
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(m * m, m * m);
  // column-major vec: vec(A^T U) = (I kron A^T) vec U, vec(U A) = (A^T kron I) vec U
  for (Eigen::Index i = 0; i < m; ++i) {
    system.block(i * m, i * m, m, m) += at;
    for (Eigen::Index j = 0; j < m; ++j) {
      system.block(i * m, j * m, m, m).diagonal().array() += at(i, j);
    }
  }
  Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(Eigen::MatrixXd::Identity(m, m).eval().data(), m * m);
  const auto lu = system.fullPivLu();
  Eigen::VectorXd vec_u = lu.solve(rhs);
  vec_u += lu.solve(rhs - system * vec_u);
  LyapunovSolution out;
  out.U = Eigen::Map<Eigen::MatrixXd>(vec_u.data(), m, m);
  out.U = 0.5 * (out.U + out.U.transpose()).eval();
  out.residual = (at * out.U + out.U * a + Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
  return out;
}

/// Block matrix [[-1, 0], [-Phi^T D 1, Psi]] driving the joint (mu, w) ODE.
inline Eigen::MatrixXd augmented_psi(const Eigen::MatrixXd& psi, const FeatureMap& features, const Eigen::VectorXd& d) {
  const auto n = psi.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n + 1, n + 1);
  out(0, 0) = -1.0;
  out.block(1, 0, n, 1) = -(features.matrix().transpose() * d);
  out.block(1, 1, n, n) = psi;
  return out;
}

struct LyapunovConstants {
  Eigen::MatrixXd U;
  double residual = 0.0;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

/// Closed forms from the eigenvalue range of the Lyapunov solution:
/// c1 = 0.9/lmax, c2 = 2.25 lmax/lmin, c3 = 2 lmax^2 (r^2 + 55 (1+r)^3) / (0.9 lmin).
inline LyapunovConstants constants_from_spectrum(double lambda_max, double lambda_min, double r_max) {
  LyapunovConstants c;
  c.lambda_max = lambda_max;
  c.lambda_min = lambda_min;
  c.c1 = 0.9 / lambda_max;
  c.c2 = 2.25 * lambda_max / lambda_min;
  c.c3 = 2.0 * lambda_max * lambda_max * (r_max * r_max + 55.0 * std::pow(1.0 + r_max, 3)) / (0.9 * lambda_min);
  return c;
}

inline LyapunovConstants lyapunov_constants_for(const Eigen::MatrixXd& hurwitz, double r_max) {
  auto sol = solve_lyapunov(hurwitz);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sol.U).eigenvalues();
  if (!(ev.minCoeff() > 0.0)) throw NumericalError("Lyapunov solution is not positive definite");
  auto c = constants_from_spectrum(ev.maxCoeff(), ev.minCoeff(), r_max);
  c.U = std::move(sol.U);
  c.residual = sol.residual;
  return c;
}

inline LyapunovConstants lyapunov_constants(const Eigen::MatrixXd& psi, const FeatureMap& features,
                                            const Eigen::VectorXd& d, double r_max) {
  return lyapunov_constants_for(augmented_psi(psi, features, d), r_max);
}

/// Every theory constant for one configuration.
struct TheoreticalConstants {
  LyapunovConstants lyapunov;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double rho = 0.0;
  bool step_size_ok = false;
  MixingTime tau;
};

inline TheoreticalConstants theoretical_constants(const InducedChain& chain, const FeatureMap& features,
                                                  const FixedPoint& fp, double r_max, double eta, std::size_t N,
                                                  double beta, std::size_t K,
                                                  std::size_t horizon = kDefaultMixingHorizon) {
  TheoreticalConstants tc;
  tc.lyapunov = lyapunov_constants(fp.psi, features, fp.d, r_max);
  const auto cond = step_size_condition(beta, K, eta, N);
  tc.step_size_ok = cond.ok;
  tc.rho = cond.rho;
  const double eta_pow = std::pow(eta, static_cast<double>(N) - 1.0);
  const double gap = 1.0 - eta_pow;
  tc.kappa1 = gap > 0.0 ? 2.0 * static_cast<double>(N * N) * (1.0 + 1.0 / eta_pow) / gap
                        : std::numeric_limits<double>::infinity();
  tc.kappa2 = 8.0 * (1.0 + 1.0 / eta_pow) * std::pow(static_cast<double>(N), 2.5) * r_max;
  tc.tau = mixing_time(chain.transition, features, fp.psi, beta, horizon);
  return tc;
}

}  // namespace dtd
