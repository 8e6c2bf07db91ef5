#include "mfg/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfg/errors.hpp"

namespace mfg::hjb {

std::vector<double> time_grid(double T, double dt) {
  if (!(dt > 0.0) || !(T > 0.0) || dt > T) fail(ErrorCode::StepInvalid, "need 0 < dt <= T");
  const double ratio = T / dt;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-6 * ratio) {
    fail(ErrorCode::StepInvalid, "T = " + std::to_string(T) + " is not a multiple of dt = " +
                                     std::to_string(dt));
  }
  const auto n = static_cast<std::size_t>(steps);
  std::vector<double> grid(n + 1);
  for (std::size_t k = 0; k <= n; ++k) grid[k] = static_cast<double>(k) * dt;
  grid[n] = T;
  return grid;
}

namespace {

void require_continuous(const ScenarioModel& scenario) {
  if (scenario.kernel.mode != KernelMode::ContinuousRate) {
    fail(ErrorCode::ModeMismatch, "the HJB solver needs a continuous-rate kernel");
  }
}

void require_grid(const MeanFieldTrajectory& m_traj, const std::vector<double>& grid) {
  if (m_traj.size() != grid.size()) {
    fail(ErrorCode::GridMismatch, "trajectory has " + std::to_string(m_traj.size()) +
                                      " points, the time grid has " + std::to_string(grid.size()));
  }
  for (std::size_t k = 0; k < grid.size() && k < m_traj.times.size(); ++k)
    if (std::abs(m_traj.times[k] - grid[k]) > 1e-9 * std::max(1.0, grid.back())) {
      fail(ErrorCode::GridMismatch, "trajectory time " + std::to_string(m_traj.times[k]) +
                                        " differs from grid time " + std::to_string(grid[k]));
    }
}

Population midpoint(const Population& a, const Population& b) {
  Population mid = a;
  auto out = mid.flat();
  const auto other = b.flat();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (out[i] + other[i]);
  return mid;
}

// v + h * slope
StateTable axpy(const StateTable& v, double h, const StateTable& slope) {
  StateTable out = v;
  auto o = out.flat();
  const auto s = slope.flat();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += h * s[i];
  return out;
}

StateTable rk4_combine(const StateTable& v, double h, const StateTable& k1, const StateTable& k2,
                       const StateTable& k3, const StateTable& k4) {
  StateTable out = v;
  auto o = out.flat();
  const auto a = k1.flat(), b = k2.flat(), c = k3.flat(), d = k4.flat();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
  return out;
}

class Hamiltonian {
 public:
  explicit Hamiltonian(const ScenarioModel& scenario)
      : scenario_(scenario), row_(scenario.space.state_count()) {}

  // Q(x, a) = r + Σ_{y≠x} q̄_{xay} (v(y) - v(x))
  void q_values(double t, std::size_t type, std::size_t x, const Population& m,
                std::span<const double> v, std::vector<double>& q) {
    const std::size_t na = scenario_.space.action_count(type, x);
    q.resize(na);
    for (std::size_t a = 0; a < na; ++a) {
      std::fill(row_.begin(), row_.end(), 0.0);
      scenario_.kernel.row(t, type, x, a, m, row_);
      double acc = scenario_.payoff.running(t, type, x, a, m);
      for (std::size_t y = 0; y < row_.size(); ++y)
        if (y != x && row_[y] != 0.0) acc += row_[y] * (v[y] - v[x]);
      q[a] = acc;
    }
  }

  // Right-hand side max_a Q, or Σ_a u(a|x) Q when a policy is supplied.
  StateTable slope(double t, const Population& m, const StateTable& v, const StagePolicy* u) {
    StateTable out(v.types(), v.states());
    for (std::size_t k = 0; k < v.types(); ++k)
      for (std::size_t x = 0; x < v.states(); ++x) {
        q_values(t, k, x, m, v.row(k), q_);
        if (u) {
          const auto probs = u->at(k, x);
          double acc = 0.0;
          for (std::size_t a = 0; a < q_.size(); ++a) acc += probs[a] * q_[a];
          out(k, x) = acc;
        } else {
          out(k, x) = *std::max_element(q_.begin(), q_.end());
        }
      }
    return out;
  }

 private:
  const ScenarioModel& scenario_;
  std::vector<double> row_;
  std::vector<double> q_;
};

ValueTable backward_pass(const ScenarioModel& scenario, const MeanFieldTrajectory& m_traj,
                         const std::vector<double>& grid, const PolicyTrajectory* fixed,
                         PolicyTrajectory* chosen, std::optional<double> temperature) {
  const auto& space = scenario.space;
  const std::size_t N = grid.size() - 1;
  const std::size_t types = space.type_count();
  const std::size_t n = space.state_count();
  Hamiltonian ham(scenario);

  ValueTable values(N + 1, StateTable(types, n));
  for (std::size_t k = 0; k < types; ++k)
    for (std::size_t x = 0; x < n; ++x) values[N](k, x) = scenario.payoff.terminal(k, x, m_traj[N]);
  if (chosen) chosen->stages.assign(N, StagePolicy(space));

  std::vector<double> q;
  for (std::size_t s = N; s-- > 0;) {
    const double h = grid[s + 1] - grid[s];
    const double t_mid = grid[s] + 0.5 * h;
    const Population m_mid = midpoint(m_traj[s], m_traj[s + 1]);
    const StagePolicy* u = fixed ? &(*fixed)[s] : nullptr;
    const StateTable& v = values[s + 1];
    const StateTable k1 = ham.slope(grid[s + 1], m_traj[s + 1], v, u);
    const StateTable k2 = ham.slope(t_mid, m_mid, axpy(v, 0.5 * h, k1), u);
    const StateTable k3 = ham.slope(t_mid, m_mid, axpy(v, 0.5 * h, k2), u);
    const StateTable k4 = ham.slope(grid[s], m_traj[s], axpy(v, h, k3), u);
    values[s] = rk4_combine(v, h, k1, k2, k3, k4);
    for (double value : values[s].flat())
      if (!std::isfinite(value)) {
        fail(ErrorCode::NonFiniteValue, "HJB value at t=" + std::to_string(grid[s]));
      }

    if (chosen) {
      const StateTable v_mid = midpoint(values[s], values[s + 1]);
      for (std::size_t k = 0; k < types; ++k)
        for (std::size_t x = 0; x < n; ++x) {
          ham.q_values(t_mid, k, x, m_mid, v_mid.row(k), q);
          auto probs = (*chosen)[s].at(k, x);
          if (temperature) {
            softmax(q, *temperature, probs);
          } else {
            probs[tie_broken_argmax(q)] = 1.0;
          }
        }
    }
  }
  return values;
}

StateTable drift(const ScenarioModel& scenario, const StagePolicy& u, const Population& m, double t) {
  if (scenario.explicit_drift) {
    StateTable out(m.types(), m.states());
    (*scenario.explicit_drift)(t, u, m, out);
    return out;
  }
  return generator_drift(scenario, u, m, t);
}

}  // namespace

BellmanResult backward_hjb(const ScenarioModel& scenario, const MeanFieldTrajectory& m_traj,
                           double dt, std::optional<double> temperature) {
  require_continuous(scenario);
  const auto grid = time_grid(scenario.horizon.T, dt);
  require_grid(m_traj, grid);
  BellmanResult out;
  out.values = backward_pass(scenario, m_traj, grid, nullptr, &out.policy, temperature);
  return out;
}

ValueTable evaluate_policy(const ScenarioModel& scenario, const PolicyTrajectory& u,
                           const MeanFieldTrajectory& m_traj, double dt) {
  require_continuous(scenario);
  const auto grid = time_grid(scenario.horizon.T, dt);
  require_grid(m_traj, grid);
  if (u.size() < grid.size() - 1) fail(ErrorCode::GridMismatch, "policy does not span the horizon");
  return backward_pass(scenario, m_traj, grid, &u, nullptr, std::nullopt);
}

MeanFieldTrajectory forward_kfe(const ScenarioModel& scenario, const PolicyTrajectory& u,
                                const Population& m0, double dt) {
  require_continuous(scenario);
  const auto grid = time_grid(scenario.horizon.T, dt);
  const std::size_t N = grid.size() - 1;
  if (u.size() < N) fail(ErrorCode::GridMismatch, "policy does not span the horizon");

  if (scenario.explicit_drift) {
    StateTable given(m0.types(), m0.states());
    (*scenario.explicit_drift)(0.0, u[0], m0, given);
    const StateTable induced = generator_drift(scenario, u[0], m0, 0.0);
    if (l1_distance(given.flat(), induced.flat()) > 1e-8) {
      fail(ErrorCode::DriftGeneratorMismatch,
           "explicit drift disagrees with the generator-induced drift at m0");
    }
  }

  MeanFieldTrajectory traj;
  traj.times = grid;
  traj.points.reserve(N + 1);
  traj.points.push_back(m0);
  for (std::size_t s = 0; s < N; ++s) {
    const double h = grid[s + 1] - grid[s];
    const Population& m = traj.points.back();
    const StateTable k1 = drift(scenario, u[s], m, grid[s]);
    const StateTable k2 = drift(scenario, u[s], axpy(m, 0.5 * h, k1), grid[s] + 0.5 * h);
    const StateTable k3 = drift(scenario, u[s], axpy(m, 0.5 * h, k2), grid[s] + 0.5 * h);
    const StateTable k4 = drift(scenario, u[s], axpy(m, h, k3), grid[s + 1]);
    traj.points.push_back(rk4_combine(m, h, k1, k2, k3, k4));
  }
  return traj;
}

MfeSolution solve_mfg_fixed_point(const ScenarioModel& scenario, const FixedPointOptions& options,
                                  double dt) {
  require_continuous(scenario);
  options.validate();
  const double lambda = options.damping;
  const auto grid = time_grid(scenario.horizon.T, dt);

  auto temperature_at = [&](std::size_t k) -> std::optional<double> {
    if (!options.smoothing) return std::nullopt;
    return options.smoothing->temperature(k);
  };

  MeanFieldTrajectory m = forward_kfe(
      scenario,
      backward_hjb(scenario, MeanFieldTrajectory::constant(scenario.m0, grid), dt, temperature_at(0))
          .policy,
      scenario.m0, dt);

  MfeSolution best;
  best.residual = std::numeric_limits<double>::infinity();
  std::vector<double> history;
  for (std::size_t k = 1; k <= options.max_iterations; ++k) {
    const auto temperature = temperature_at(k);
    BellmanResult br = backward_hjb(scenario, m, dt, temperature);
    MeanFieldTrajectory m_hat = forward_kfe(scenario, br.policy, scenario.m0, dt);
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
  best.values = backward_hjb(scenario, best.mean_field, dt).values;
  return best;
}

Exploitability exploitability(const ScenarioModel& scenario, const MfeSolution& sol, double dt) {
  Exploitability out;
  out.best_response_value = backward_hjb(scenario, sol.mean_field, dt).values.front();
  out.policy_value = evaluate_policy(scenario, sol.policy, sol.mean_field, dt).front();
  const auto& br = out.best_response_value;
  const auto& pv = out.policy_value;
  out.max_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < br.types(); ++k)
    for (std::size_t x = 0; x < br.states(); ++x) {
      const double gap = br(k, x) - pv(k, x);
      out.max_gap = std::max(out.max_gap, gap);
      out.weighted_gap += scenario.type_shares.at(k) * scenario.m0(k, x) * gap;
    }
  return out;
}

double hjb_residual(const ScenarioModel& scenario, const MeanFieldTrajectory& m_traj,
                    const ValueTable& values, double dt) {
  require_continuous(scenario);
  const auto grid = time_grid(scenario.horizon.T, dt);
  require_grid(m_traj, grid);
  if (values.size() != grid.size()) fail(ErrorCode::GridMismatch, "value table does not match the grid");
  Hamiltonian ham(scenario);
  double worst = 0.0;
  for (std::size_t s = 1; s + 1 < grid.size(); ++s) {
    const StateTable H = ham.slope(grid[s], m_traj[s], values[s], nullptr);
    const double h = grid[s + 1] - grid[s];
    for (std::size_t k = 0; k < H.types(); ++k)
      for (std::size_t x = 0; x < H.states(); ++x)
        worst = std::max(worst, std::abs((values[s + 1](k, x) - values[s](k, x)) / h + H(k, x)));
  }
  return worst;
}

}  // namespace mfg::hjb
