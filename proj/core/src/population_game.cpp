#include "mfg/population_game.hpp"

#include <algorithm>
#include <cmath>

#include "mfg/errors.hpp"

namespace mfg {

EquilibriumReport check_population_equilibrium(std::span<const double> m,
                                               std::span<const double> payoffs, double tol) {
  if (m.size() != payoffs.size()) fail(ErrorCode::ShapeMismatch, "payoff/profile size mismatch");
  EquilibriumReport report;
  if (m.empty()) return report;
  const double best = *std::max_element(payoffs.begin(), payoffs.end());
  for (std::size_t x = 0; x < m.size(); ++x) {
    if (!(m[x] > tol)) continue;
    const double gap = best - payoffs[x];
    report.max_gap = std::max(report.max_gap, gap);
    if (payoffs[x] < best - tol) {
      report.is_equilibrium = false;
      report.violating_states.push_back(x);
    }
  }
  return report;
}

EquilibriumReport check_population_equilibrium(std::span<const double> m,
                                               const StatePayoffFn& payoff, double tol) {
  std::vector<double> r(m.size());
  payoff(m, r);
  for (double v : r)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "payoff is not finite at m");
  return check_population_equilibrium(m, r, tol);
}

}  // namespace mfg
