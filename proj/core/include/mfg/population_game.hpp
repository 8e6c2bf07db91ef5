#pragma once

#include <functional>
#include <span>
#include <vector>

namespace mfg {

/// r_x(m) for every state x, written into the output span.
using StatePayoffFn = std::function<void(std::span<const double> m, std::span<double> r)>;

struct EquilibriumReport {
  bool is_equilibrium = true;
  /// Largest shortfall from the best payoff over supported states.
  double max_gap = 0.0;
  std::vector<std::size_t> violating_states;
};

/// Support inclusion test: every state carrying more than `tol` mass must earn
/// a payoff within `tol` of the best payoff.
EquilibriumReport check_population_equilibrium(std::span<const double> m,
                                               std::span<const double> payoffs, double tol);
EquilibriumReport check_population_equilibrium(std::span<const double> m,
                                               const StatePayoffFn& payoff, double tol);

}  // namespace mfg
