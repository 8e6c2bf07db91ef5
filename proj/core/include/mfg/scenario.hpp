#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfg/simplex.hpp"

namespace mfg {

/// States, types and the per-(type, state) action sets.
struct StateSpace {
  std::vector<std::string> states;
  std::vector<std::string> types{"default"};
  /// actions[type][state] lists the labels available to a player of `type` in `state`.
  std::vector<std::vector<std::vector<std::string>>> actions;

  std::size_t state_count() const noexcept { return states.size(); }
  std::size_t type_count() const noexcept { return types.size(); }
  std::size_t action_count(std::size_t type, std::size_t state) const {
    return actions[type][state].size();
  }
  std::size_t max_actions() const;

  /// Same action labels for every (type, state).
  static StateSpace uniform(std::vector<std::string> states, std::vector<std::string> actions,
                            std::vector<std::string> types = {"default"});
};

enum class KernelMode { DiscreteProbability, ContinuousRate };

std::string_view to_string(KernelMode mode) noexcept;

/// Mixed action kernel for one stage: probabilities over the actions of each (type, state).
class StagePolicy {
 public:
  StagePolicy() = default;
  explicit StagePolicy(const StateSpace& space);

  static StagePolicy pure(const StateSpace& space, std::size_t action = 0);
  static StagePolicy uniform(const StateSpace& space);

  std::span<double> at(std::size_t type, std::size_t state) { return probs_[type][state]; }
  std::span<const double> at(std::size_t type, std::size_t state) const {
    return probs_[type][state];
  }
  std::size_t type_count() const noexcept { return probs_.size(); }
  std::size_t state_count() const noexcept { return probs_.empty() ? 0 : probs_[0].size(); }

  bool operator==(const StagePolicy&) const = default;

 private:
  std::vector<std::vector<std::vector<double>>> probs_;
};

/// u_t(a | x) for t = 0 .. stages-1.
struct PolicyTrajectory {
  std::vector<StagePolicy> stages;

  std::size_t size() const noexcept { return stages.size(); }
  const StagePolicy& operator[](std::size_t t) const { return stages[t]; }
  StagePolicy& operator[](std::size_t t) { return stages[t]; }
};

/// Throws ShapeMismatch / InvalidDistribution if `policy` is not a valid kernel on `space`.
void check_policy(const StateSpace& space, const StagePolicy& policy);

/// A time grid with one population profile per grid point.
struct MeanFieldTrajectory {
  std::vector<double> times;
  std::vector<Population> points;

  std::size_t size() const noexcept { return points.size(); }
  const Population& operator[](std::size_t k) const { return points[k]; }
  Population& operator[](std::size_t k) { return points[k]; }

  static MeanFieldTrajectory constant(const Population& m, const std::vector<double>& times);
};

/// sup over grid points of the summed per-type L1 distance.
double sup_l1_distance(const MeanFieldTrajectory& a, const MeanFieldTrajectory& b);

/// v_t(type, state) along a fixed trajectory, t = 0 .. horizon.
using ValueTable = std::vector<StateTable>;

/// out[x'] = q_{x a x'}(t, m) for a player of `type`.
using KernelRowFn = std::function<void(double t, std::size_t type, std::size_t state,
                                       std::size_t action, const Population& m,
                                       std::span<double> out)>;

struct TransitionKernelSpec {
  KernelMode mode = KernelMode::DiscreteProbability;
  KernelRowFn row;
};

using RunningPayoffFn = std::function<double(double t, std::size_t type, std::size_t state,
                                             std::size_t action, const Population& m)>;
using TerminalPayoffFn =
    std::function<double(std::size_t type, std::size_t state, const Population& m)>;

/// Pairwise payoff r̄(x, a, w) against an opponent at flattened profile index w
/// (w = type' * states + state').
struct PairwisePayoff {
  /// base[type][state][action], added to the reduced pairwise term.
  std::vector<std::vector<std::vector<double>>> base;
  /// pairwise[type][state][action][w].
  std::vector<std::vector<std::vector<std::vector<double>>>> pairwise;
};

using RunningTable = std::vector<std::vector<std::vector<double>>>;

struct PayoffSpec {
  RunningPayoffFn running;
  TerminalPayoffFn terminal;
  /// Present when `running` was generated from a pairwise table.
  std::optional<PairwisePayoff> pairwise;
};

/// Explicit mean-field drift f̃_t(u, m); `out` has the shape of `m`.
using MfDriftFn =
    std::function<void(double t, const StagePolicy& u, const Population& m, StateTable& out)>;

struct Horizon {
  KernelMode mode = KernelMode::DiscreteProbability;
  std::size_t stages = 0;  // discrete
  double T = 0.0;          // continuous
  double dt = 1e-3;        // continuous

  /// Number of grid intervals: stages, or round(T / dt).
  std::size_t steps() const;
  std::vector<double> grid() const;
};

/// Parameters of a revision-protocol kernel; kept so studies can rebuild it.
struct RevisionSpec {
  std::string protocol = "replicator";
  double temperature = 0.1;
  double mutation = 0.0;
};

struct ScenarioModel {
  std::string name;
  StateSpace space;
  TransitionKernelSpec kernel;
  PayoffSpec payoff;
  Horizon horizon;
  Population m0;
  /// Population share of each type, used by the n-player simulator.
  std::vector<double> type_shares;
  std::optional<MfDriftFn> explicit_drift;
  std::optional<RevisionSpec> revision;
  /// Uniformization rate for per-player exponential revision clocks.
  double clock_rate = 1.0;
};

inline constexpr std::uint64_t kDefaultProbeSeed = 0x6d66676b2d70726fULL;
inline constexpr std::size_t kProbeCount = 10;

/// Checks shapes, action sets, the initial profile, and the kernel invariants
/// at m0 and at kProbeCount random profiles drawn with `probe_seed`.
ScenarioModel validate_scenario(ScenarioModel candidate,
                                std::uint64_t probe_seed = kDefaultProbeSeed);

/// Throws (KernelNotStochastic / GeneratorRowSum / NegativeRate / NonFiniteValue)
/// if the kernel violates its mode invariant at (t, m).
void check_kernel_at(const ScenarioModel& scenario, double t, const Population& m);

/// r(x, a, m) = base(x, a) + Σ_w r̄(x, a, w) m(w).
RunningTable reduce_pairwise_payoff(const PairwisePayoff& payoff, const Population& m);
RunningPayoffFn make_pairwise_running(PairwisePayoff payoff);

/// ℒ_{xx'} = Σ_a u(a|x) q_{xax'}(t, m) for one type.
Matrix policy_averaged_kernel(const ScenarioModel& scenario, const StagePolicy& u,
                              const Population& m, double t, std::size_t type,
                              KernelMode expected);

/// Drift of the population under the generator: ṁ(x') = Σ_x m(x) ℒ_{xx'}.
StateTable generator_drift(const ScenarioModel& scenario, const StagePolicy& u,
                           const Population& m, double t);

/// Uniform-on-simplex profile for each type (Dirichlet(1)).
template <class Rng>
Population random_profile(std::size_t types, std::size_t states, Rng& rng);

/// r_x(m) = max_a r_0(x, a, m) for the first type; the population-game payoff
/// used by the evolutionary dynamics.
std::function<void(std::span<const double>, std::span<double>)> state_payoff(
    const ScenarioModel& scenario);

}  // namespace mfg

#include <random>

namespace mfg {

template <class Rng>
Population random_profile(std::size_t types, std::size_t states, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Population m(types, states);
  for (std::size_t k = 0; k < types; ++k) {
    double total = 0.0;
    for (std::size_t x = 0; x < states; ++x) total += (m(k, x) = e(rng));
    for (std::size_t x = 0; x < states; ++x) m(k, x) /= total;
  }
  return m;
}

}  // namespace mfg
