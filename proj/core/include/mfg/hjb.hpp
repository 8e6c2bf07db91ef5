#pragma once

#include <vector>

#include "mfg/equilibrium.hpp"
#include "mfg/scenario.hpp"

namespace mfg::hjb {

/// Uniform time grid 0, dt, ..., T; throws StepInvalid unless T / dt is an integer.
std::vector<double> time_grid(double T, double dt);

/// Backward HJB system along a fixed trajectory, for ṽ_t(x) = v_t(x, m_t):
///
///   dṽ/dt = -max_a { r_t(x, a, m_t) + Σ_{x'≠x} q̄_{xax'}(m_t) (ṽ(x') - ṽ(x)) }
///
/// integrated by RK4 with the maximization redone at every substage and m
/// interpolated linearly between grid points. The policy on [t_k, t_{k+1}) is
/// the tie-broken maximizer at the interval midpoint (softmax when a
/// temperature is given).
BellmanResult backward_hjb(const ScenarioModel& scenario, const MeanFieldTrajectory& m_traj,
                           double dt, std::optional<double> temperature = std::nullopt);

/// Value of a fixed piecewise-constant policy along `m_traj`, same RK4 scheme.
ValueTable evaluate_policy(const ScenarioModel& scenario, const PolicyTrajectory& u,
                           const MeanFieldTrajectory& m_traj, double dt);

/// RK4 for ṁ(x') = Σ_x m(x) ℒ_{xx'}(u_t, m), or the scenario's explicit drift.
MeanFieldTrajectory forward_kfe(const ScenarioModel& scenario, const PolicyTrajectory& u,
                                const Population& m0, double dt);

/// Damped best-response iteration alternating backward_hjb and forward_kfe.
MfeSolution solve_mfg_fixed_point(const ScenarioModel& scenario,
                                  const FixedPointOptions& options, double dt);

struct Exploitability {
  /// max over (type, x) of v^BR_0 - v^u_0
  double max_gap = 0.0;
  /// Σ_type share Σ_x m0(x) (v^BR_0 - v^u_0)
  double weighted_gap = 0.0;
  StateTable best_response_value;
  StateTable policy_value;
};

/// Best-response gap of `sol.policy` against its own trajectory.
Exploitability exploitability(const ScenarioModel& scenario, const MfeSolution& sol, double dt);

/// Largest |Δṽ/Δt + max_a{...}| over interior grid times, with the Hamiltonian
/// evaluated at the left endpoint.
double hjb_residual(const ScenarioModel& scenario, const MeanFieldTrajectory& m_traj,
                    const ValueTable& values, double dt);

}  // namespace mfg::hjb
