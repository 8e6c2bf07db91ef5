#include <algorithm>
#include <cmath>

#include "mfg/equilibrium.hpp"
#include "mfg/errors.hpp"
#include "mfg/hjb.hpp"
#include "mfg/simplex_grid.hpp"

namespace mfg::hjb {

ControlSolution solve_mf_control_simplex_dp(const ScenarioModel& scenario,
                                            const std::vector<StagePolicy>& controls,
                                            std::size_t resolution, double dt) {
  if (scenario.kernel.mode != KernelMode::ContinuousRate) {
    fail(ErrorCode::ModeMismatch, "the planner problem needs a continuous-rate kernel");
  }
  const auto& space = scenario.space;
  if (space.state_count() > SimplexGrid::kMaxStates) {
    fail(ErrorCode::StateTooLarge, "simplex-grid DP supports at most 4 states");
  }
  if (space.type_count() != 1) fail(ErrorCode::ShapeMismatch, "simplex-grid DP needs a single type");
  if (controls.empty()) fail(ErrorCode::EmptyActionSet, "planner control set is empty");
  for (const auto& u : controls) check_policy(space, u);

  const std::size_t n = space.state_count();
  ControlSolution sol{SimplexGrid(n, resolution), time_grid(scenario.horizon.T, dt), {}, {}};
  const auto& grid = sol.grid;
  const std::size_t N = sol.times.size() - 1;
  sol.values.assign(N + 1, std::vector<double>(grid.size()));
  sol.control.assign(N, std::vector<std::size_t>(grid.size()));

  std::vector<Population> points;
  points.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.point(i);
    points.push_back(StateTable::from_rows({p}));
  }

  for (std::size_t i = 0; i < grid.size(); ++i) {
    double acc = 0.0;
    for (std::size_t x = 0; x < n; ++x) acc += points[i](0, x) * scenario.payoff.terminal(0, x, points[i]);
    sol.values[N][i] = acc;
  }

  std::vector<double> q(controls.size());
  std::vector<double> next(n);
  for (std::size_t s = N; s-- > 0;) {
    const double t = sol.times[s];
    const double h = sol.times[s + 1] - t;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Population& m = points[i];
      for (std::size_t c = 0; c < controls.size(); ++c) {
        const StagePolicy& u = controls[c];
        double reward = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
          if (m(0, x) == 0.0) continue;
          const auto probs = u.at(0, x);
          for (std::size_t a = 0; a < probs.size(); ++a)
            if (probs[a] != 0.0) reward += m(0, x) * probs[a] * scenario.payoff.running(t, 0, x, a, m);
        }
        StateTable f(1, n);
        if (scenario.explicit_drift) {
          (*scenario.explicit_drift)(t, u, m, f);
        } else {
          f = generator_drift(scenario, u, m, t);
        }
        for (std::size_t x = 0; x < n; ++x) {
          next[x] = m(0, x) + h * f(0, x);
          if (next[x] < -kOffSimplexSlack) {
            fail(ErrorCode::OffSimplexStep, "Euler step leaves the simplex at t=" + std::to_string(t) +
                                                " (mass " + std::to_string(next[x]) + "); reduce dt");
          }
        }
        renormalize(next);
        q[c] = h * reward + grid.interpolate(sol.values[s + 1], next);
      }
      const std::size_t best = tie_broken_argmax(q);
      sol.control[s][i] = best;
      sol.values[s][i] = q[best];
    }
  }
  return sol;
}

}  // namespace mfg::hjb
