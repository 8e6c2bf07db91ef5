#pragma once

#include <optional>

#include "mfg/equilibrium.hpp"
#include "mfg/scenario.hpp"

namespace mfg::bsk {

/// Backward Bellman-Shapley recursion along a fixed mean-field trajectory.
///
///   v_T(x) = g(x, m_T)
///   v_t(x) = max_a { r_t(x, a, m_t) + Σ_x' q_{xax'}(m_t) v_{t+1}(x') }
///
/// The policy is the tie-broken argmax, or softmax(Q / temperature) when a
/// temperature is given.
BellmanResult backward_bellman(const ScenarioModel& scenario, const MeanFieldTrajectory& m_traj,
                               std::optional<double> temperature = std::nullopt);

/// m_{t+1}(x') = Σ_x m_t(x) ℒ_{xx'}(u_t, m_t) with ℒ the policy mix of q.
MeanFieldTrajectory forward_kolmogorov(const ScenarioModel& scenario, const PolicyTrajectory& u,
                                       const Population& m0);

/// Damped best-response iteration on the mean-field trajectory. The first
/// forward pass (best response to the constant m0 trajectory) seeds the
/// iteration; non-convergence is reported through MfeSolution::converged.
MfeSolution solve_bsk_fixed_point(const ScenarioModel& scenario,
                                  const FixedPointOptions& options = {});

struct SupportWitness {
  std::size_t t = 0;
  std::size_t type = 0;
  std::size_t state = 0;
  std::size_t action = 0;
  double gap = 0.0;
};

struct SupportReport {
  bool ok = true;
  double worst_gap = 0.0;
  std::vector<SupportWitness> witnesses;
};

/// Every (t, x, a) played with weight m_t(x) u_t(a|x) > tol must be within tol
/// of the best one-stage lookahead value.
SupportReport verify_support_condition(const ScenarioModel& scenario, const MfeSolution& sol,
                                       double tol);

struct RiskOptions {
  /// Evaluate the multiplicative recursion through log-sum-exp.
  bool log_space = true;
};

/// Multiplicative Bellman-Shapley recursion for the exponential utility
/// e^{μ R}. Values are certainty equivalents (1/μ) log W_t(x); the optimizer
/// is max over actions for μ > 0 and min for μ < 0.
BellmanResult risk_sensitive_backward(const ScenarioModel& scenario, double mu,
                                      const MeanFieldTrajectory& m_traj,
                                      const RiskOptions& options = {});

struct RiskOracleResult {
  /// (1/μ) log E[e^{μ R}] per initial (type, state).
  StateTable certainty_equivalent;
  StateTable mean;
  StateTable variance;
  std::size_t paths = 0;
};

inline constexpr double kMaxEnumeratedPaths = 1e6;

/// Exact enumeration of every trajectory under `u` along `m_traj`.
/// Throws TooLarge when |X|^T |A|^T exceeds kMaxEnumeratedPaths.
RiskOracleResult enumerate_risk_value_oracle(const ScenarioModel& scenario, double mu,
                                             const PolicyTrajectory& u,
                                             const MeanFieldTrajectory& m_traj);

}  // namespace mfg::bsk
