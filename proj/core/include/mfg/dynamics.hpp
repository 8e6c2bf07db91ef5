#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mfg/population_game.hpp"
#include "mfg/scenario.hpp"
#include "mfg/simplex.hpp"

namespace mfg::dynamics {

enum class Protocol { Replicator, Smith, Bnn, SmoothedBestResponse };

Protocol parse_protocol(std::string_view name);
std::string_view to_string(Protocol protocol) noexcept;
inline constexpr Protocol kAllProtocols[] = {Protocol::Replicator, Protocol::Smith, Protocol::Bnn,
                                             Protocol::SmoothedBestResponse};

struct RevisionProtocol {
  Protocol kind = Protocol::Replicator;
  /// Softmax temperature, smoothed best response only.
  double temperature = 0.1;
  StatePayoffFn payoff;
};

/// Population rate kernel: L(x, x') is the switching rate x -> x' at (t, m).
/// Only off-diagonal entries are meaningful.
using RateKernel = std::function<void(double t, std::span<const double> m, Matrix& L)>;

RateKernel protocol_to_kernel(const RevisionProtocol& protocol);

/// Adds rate epsilon / |X| towards every other state (uniform mutation).
RateKernel with_mutation(RateKernel kernel, double epsilon);

/// Kolmogorov forward drift with inflow through L(x', x) and outflow through L(x, x').
std::vector<double> mean_field_drift(const Matrix& L, std::span<const double> m);

enum class Method { ExplicitEuler, Rk4 };

struct IntegratorConfig {
  Method method = Method::Rk4;
  double step = 1e-3;
  double horizon = 1.0;
  bool renormalize = false;
};

/// Integrates ṁ = drift(L(t, m), m) on a uniform grid of round(horizon / step)
/// intervals. Throws StepUnstable if any |m(x)| exceeds 2.
MeanFieldTrajectory integrate_forward(const RateKernel& kernel, const SimplexVector& m0,
                                      const IntegratorConfig& cfg);

struct RestPointOptions {
  std::size_t max_iterations = 200;
  double dedup_distance = 1e-6;
};

struct SeedOutcome {
  bool converged = false;
  double residual = 0.0;
  std::size_t iterations = 0;
  std::vector<double> point;
};

struct RestPointResult {
  std::vector<SimplexVector> points;
  /// One entry per seed; non-converged seeds are reported here, not thrown.
  std::vector<SeedOutcome> seeds;
};

/// Multistart Levenberg-Marquardt descent on ‖ṁ‖² in the simplex chart,
/// projecting every iterate back onto the simplex.
RestPointResult find_rest_points(const RateKernel& kernel, std::span<const SimplexVector> seeds,
                                 double tol, const RestPointOptions& options = {});

/// Revision kernel of a scenario whose payoff defines r_x(m).
RateKernel scenario_protocol_kernel(const ScenarioModel& scenario, Protocol protocol,
                                    double temperature);

/// Continuous-time scenario whose generator is the revision kernel of `base`'s
/// state payoff (plus uniform mutation). Every state gets the single action
/// "revise"; horizon, m0 and terminal payoff are kept from `base`.
ScenarioModel revision_scenario(const ScenarioModel& base, const RevisionSpec& spec);

}  // namespace mfg::dynamics
