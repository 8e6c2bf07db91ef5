#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfg/scenario.hpp"
#include "mfg/stats.hpp"

namespace mfg::nplayer {

enum class InitMode {
  /// Each player's state drawn independently from m0.
  Iid,
  /// Largest-remainder rounding of n * m0, assigned in player order.
  ExactProportions,
};

/// An explicitly placed player; `stream` selects its random sub-stream.
struct PlayerSpec {
  std::size_t type = 0;
  std::size_t state = 0;
  std::uint64_t stream = 0;
};

struct SimConfig {
  std::size_t n = 100;
  std::uint64_t seed = 0;
  std::size_t replications = 1;
  /// Per-stage policy; when empty `stationary_policy` (default: action 0) is used.
  PolicyTrajectory policy;
  std::optional<StagePolicy> stationary_policy;
  InitMode init = InitMode::Iid;
  /// Record the states of the first `tagged` players.
  std::size_t tagged = 0;
  /// Continuous mode: record every `record_stride` grid steps.
  std::size_t record_stride = 1;
  /// Overrides n and init when nonempty.
  std::vector<PlayerSpec> players;
  std::size_t threads = 0;
};

struct Replication {
  /// M^n at each record time; entries are multiples of 1/n_type.
  std::vector<Population> profiles;
  /// tagged[j][k]: state of tagged player j at record time k.
  std::vector<std::vector<std::uint32_t>> tagged;
  /// Revision opportunities (continuous) or player-steps (discrete).
  std::size_t events = 0;
};

struct EmpiricalTrajectory {
  std::vector<double> times;
  /// Players per type.
  std::vector<std::size_t> type_counts;
  std::vector<Replication> replications;

  /// Replication average of M^n_t, summed in replication order.
  std::vector<Population> mean() const;
};

/// Discrete mode steps every player synchronously with q(t, M^n_t). Continuous
/// mode gives each player an exponential revision clock of rate
/// `scenario.clock_rate` and accepts a move x -> x' with probability
/// rate(x, x') / clock_rate. Replication r, player j draws from
/// make_stream(seed, r, stream_j).
EmpiricalTrajectory simulate_nplayer(const ScenarioModel& scenario, const SimConfig& cfg);

/// Policy for stage s under `cfg`.
const StagePolicy& stage_policy(const SimConfig& cfg, const StagePolicy& fallback, std::size_t stage);

/// The mean-field trajectory from m0 under the same policy the simulator uses.
MeanFieldTrajectory mean_field_reference(const ScenarioModel& scenario, const SimConfig& cfg);

/// sup_t Σ |M^n_t - m_t| with M^n held piecewise constant onto m's grid.
double l1_trajectory_distance(const std::vector<double>& times, const std::vector<Population>& mn,
                              const MeanFieldTrajectory& m);

/// Largest-remainder apportionment of `total` by `shares`.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> shares);

struct RatePoint {
  std::size_t n = 0;
  MeanEstimate distance;
};

struct ConvergenceReport {
  std::vector<RatePoint> points;
  LinearFit fit;
};

inline constexpr std::size_t kMinReplications = 30;

/// E sup_t ‖M^n - m‖₁ for each n and the log-log slope against n.
ConvergenceReport convergence_study(const ScenarioModel& scenario, const std::vector<std::size_t>& ns,
                                    const SimConfig& cfg);

struct ChaosPoint {
  std::size_t n = 0;
  /// |E φ1(x1) φ2(x2) - E φ1 E φ2| over distinct players, exchangeable estimator.
  double gap = 0.0;
  double covariance = 0.0;
  double std_error = 0.0;
  /// The same quantity from the tagged players only (all k of them).
  double tagged_gap = 0.0;
  double tagged_std_error = 0.0;
};

struct ChaosReport {
  std::vector<ChaosPoint> points;
  LinearFit fit;
};

/// Product-moment gap at record index `time_index`. `phis[j][x]` is the test
/// function of tagged player j; the exchangeable estimator uses phis[0] and phis[1].
ChaosPoint chaos_test(const EmpiricalTrajectory& traj, const std::vector<std::vector<double>>& phis,
                      std::size_t time_index);

ChaosReport chaos_study(const ScenarioModel& scenario, const std::vector<std::size_t>& ns,
                        const SimConfig& cfg, const std::vector<std::vector<double>>& phis);

struct DoubleLimitReport {
  std::vector<double> rest_point;
  /// min over t in [T/2, T] of the distance from the mean-field trajectory to the rest point.
  double mf_min_distance = 0.0;
  /// Time average of M^n over [T/2, T].
  std::vector<double> ergodic_average;
  double ergodic_distance = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
  std::string metric = "l1";
};

/// Mean field from the mutation-free revision flow against the time-averaged
/// finite-n chain (with the scenario's mutation). `scenario` must carry a revision spec.
DoubleLimitReport double_limit_experiment(const ScenarioModel& scenario, std::size_t n,
                                          double t_long, std::uint64_t seed,
                                          std::size_t threads = 0);

/// CSMA backoff model: states 0..K per type; a node in state x attempts with
/// probability u_x / (γ n + β₂ + β₃ ln n).
struct CsmaParams {
  double gamma = 1.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  /// Largest backoff index per type.
  std::vector<std::size_t> max_backoff{2};
  /// attempt[type][x] in [0, 1].
  std::vector<std::vector<double>> attempt{{1.0, 1.0, 1.0}};
  std::vector<double> type_shares;
};

double csma_attempt_probability(const CsmaParams& params, std::size_t type, std::size_t state,
                                std::size_t n);

/// Discrete-time scenario for n nodes. Success needs every other node silent:
/// the finite-n kernel uses Π (1 - p_y)^{N_y - δ}, the mean-field kernel its
/// limit exp(-n Σ m(y) p_y).
ScenarioModel csma_scenario(const CsmaParams& params, std::size_t n, bool mean_field_limit = false,
                            std::size_t stages = 100);

/// Stationary point of m ← m ℒ(m) for the mean-field kernel.
Population csma_mean_field_fixed_point(const CsmaParams& params, std::size_t n);

struct CsmaStudy {
  Population simulated;
  Population mean_field;
  double l1 = 0.0;
  std::size_t slots = 0;
  std::size_t burn_in = 0;
};

/// Time-averaged finite-n backoff distribution after `burn_in` slots.
CsmaStudy csma_study(const CsmaParams& params, std::size_t n, std::size_t slots,
                     std::size_t burn_in, std::uint64_t seed);

}  // namespace mfg::nplayer
