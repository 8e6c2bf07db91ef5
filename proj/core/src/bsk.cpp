#include "mfg/bsk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfg/errors.hpp"

namespace mfg::bsk {

namespace {

void require_discrete(const ScenarioModel& scenario) {
  if (scenario.kernel.mode != KernelMode::DiscreteProbability) {
    fail(ErrorCode::ModeMismatch, "the Bellman-Shapley solver needs a discrete-probability kernel");
  }
}

void require_grid(const ScenarioModel& scenario, const MeanFieldTrajectory& m_traj) {
  if (m_traj.size() != scenario.horizon.stages + 1) {
    fail(ErrorCode::GridMismatch, "trajectory has " + std::to_string(m_traj.size()) +
                                      " points, horizon needs " +
                                      std::to_string(scenario.horizon.stages + 1));
  }
}

// Q_t(x, a) = r_t(x, a, m_t) + Σ q_{xax'}(m_t) v_{t+1}(x').
std::vector<double> q_values(const ScenarioModel& scenario, std::size_t t, std::size_t type,
                             std::size_t x, const Population& m, std::span<const double> next,
                             std::vector<double>& row) {
  const std::size_t na = scenario.space.action_count(type, x);
  const double time = static_cast<double>(t);
  std::vector<double> q(na);
  for (std::size_t a = 0; a < na; ++a) {
    std::fill(row.begin(), row.end(), 0.0);
    scenario.kernel.row(time, type, x, a, m, row);
    double acc = scenario.payoff.running(time, type, x, a, m);
    for (std::size_t y = 0; y < row.size(); ++y)
      if (row[y] != 0.0) acc += row[y] * next[y];
    q[a] = acc;
  }
  return q;
}

}  // namespace

BellmanResult backward_bellman(const ScenarioModel& scenario, const MeanFieldTrajectory& m_traj,
                               std::optional<double> temperature) {
  require_discrete(scenario);
  require_grid(scenario, m_traj);
  const auto& space = scenario.space;
  const std::size_t T = scenario.horizon.stages;
  const std::size_t types = space.type_count();
  const std::size_t n = space.state_count();

  BellmanResult out;
  out.values.assign(T + 1, StateTable(types, n));
  out.policy.stages.assign(T, StagePolicy(space));
  for (std::size_t k = 0; k < types; ++k)
    for (std::size_t x = 0; x < n; ++x) out.values[T](k, x) = scenario.payoff.terminal(k, x, m_traj[T]);

  std::vector<double> row(n);
  for (std::size_t s = T; s-- > 0;) {
    for (std::size_t k = 0; k < types; ++k)
      for (std::size_t x = 0; x < n; ++x) {
        const auto q = q_values(scenario, s, k, x, m_traj[s], out.values[s + 1].row(k), row);
        const std::size_t best = tie_broken_argmax(q);
        out.values[s](k, x) = *std::max_element(q.begin(), q.end());
        if (!std::isfinite(out.values[s](k, x))) {
          fail(ErrorCode::NonFiniteValue, "value at t=" + std::to_string(s) + ", state '" +
                                              space.states[x] + "'");
        }
        auto probs = out.policy[s].at(k, x);
        if (temperature) {
          softmax(q, *temperature, probs);
        } else {
          probs[best] = 1.0;
        }
      }
  }
  return out;
}

MeanFieldTrajectory forward_kolmogorov(const ScenarioModel& scenario, const PolicyTrajectory& u,
                                       const Population& m0) {
  require_discrete(scenario);
  const std::size_t T = scenario.horizon.stages;
  if (u.size() < T) fail(ErrorCode::GridMismatch, "policy does not span the horizon");
  const std::size_t types = scenario.space.type_count();
  const std::size_t n = scenario.space.state_count();

  MeanFieldTrajectory traj;
  traj.times = scenario.horizon.grid();
  traj.points.reserve(T + 1);
  traj.points.push_back(m0);
  for (std::size_t t = 0; t < T; ++t) {
    const Population& m = traj.points.back();
    Population next(types, n);
    for (std::size_t k = 0; k < types; ++k) {
      const Matrix L = policy_averaged_kernel(scenario, u[t], m, static_cast<double>(t), k,
                                              KernelMode::DiscreteProbability);
      for (std::size_t x = 0; x < n; ++x) {
        const double mx = m(k, x);
        if (mx == 0.0) continue;
        for (std::size_t y = 0; y < n; ++y) next(k, y) += mx * L(x, y);
      }
    }
    traj.points.push_back(std::move(next));
  }
  return traj;
}

MfeSolution solve_bsk_fixed_point(const ScenarioModel& scenario, const FixedPointOptions& options) {
  require_discrete(scenario);
  options.validate();
  const double lambda = options.damping;
  const auto grid = scenario.horizon.grid();

  auto temperature_at = [&](std::size_t k) -> std::optional<double> {
    if (!options.smoothing) return std::nullopt;
    return options.smoothing->temperature(k);
  };

  // Warm start: forward pass of the best response to the constant profile.
  MeanFieldTrajectory m = forward_kolmogorov(
      scenario,
      backward_bellman(scenario, MeanFieldTrajectory::constant(scenario.m0, grid), temperature_at(0))
          .policy,
      scenario.m0);

  MfeSolution best;
  best.residual = std::numeric_limits<double>::infinity();
  std::vector<double> history;
  for (std::size_t k = 1; k <= options.max_iterations; ++k) {
    const auto temperature = temperature_at(k);
    BellmanResult br = backward_bellman(scenario, m, temperature);
    MeanFieldTrajectory m_hat = forward_kolmogorov(scenario, br.policy, scenario.m0);
    const double residual = lambda * sup_l1_distance(m_hat, m);
    history.push_back(residual);
    if (residual < best.residual) {
      best.policy = std::move(br.policy);
      best.mean_field = m_hat;
      best.residual = residual;
      best.iterations = k;
      best.smoothed = temperature.has_value();
      best.final_temperature = temperature.value_or(0.0);
    }
    if (residual <= options.tolerance) {
      best.converged = true;
      break;
    }
    for (std::size_t s = 0; s < m.size(); ++s) {
      auto cur = m[s].flat();
      const auto fresh = m_hat[s].flat();
      for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = (1.0 - lambda) * cur[i] + lambda * fresh[i];
    }
  }
  best.iterations = best.converged ? history.size() : best.iterations;
  best.residual_history = std::move(history);
  best.values = backward_bellman(scenario, best.mean_field).values;
  return best;
}

SupportReport verify_support_condition(const ScenarioModel& scenario, const MfeSolution& sol,
                                       double tol) {
  require_discrete(scenario);
  require_grid(scenario, sol.mean_field);
  const auto& space = scenario.space;
  const std::size_t T = scenario.horizon.stages;
  if (sol.values.size() != T + 1 || sol.policy.size() < T) {
    fail(ErrorCode::GridMismatch, "solution does not span the horizon");
  }
  SupportReport report;
  std::vector<double> row(space.state_count());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < space.type_count(); ++k)
      for (std::size_t x = 0; x < space.state_count(); ++x) {
        const auto q = q_values(scenario, t, k, x, sol.mean_field[t], sol.values[t + 1].row(k), row);
        const double top = *std::max_element(q.begin(), q.end());
        const auto probs = sol.policy[t].at(k, x);
        for (std::size_t a = 0; a < q.size(); ++a) {
          if (!(sol.mean_field[t](k, x) * probs[a] > tol)) continue;
          const double gap = top - q[a];
          report.worst_gap = std::max(report.worst_gap, gap);
          if (gap > tol) {
            report.ok = false;
            report.witnesses.push_back({t, k, x, a, gap});
          }
        }
      }
  return report;
}

}  // namespace mfg::bsk
