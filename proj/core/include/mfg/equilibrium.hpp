#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mfg/scenario.hpp"

namespace mfg {

/// Q-values closer than this (relative to max(1, |best|)) count as tied; ties go
/// to the lowest action index.
inline constexpr double kArgmaxTieTolerance = 1e-12;

/// Lowest index whose value is within the tie tolerance of the maximum.
std::size_t tie_broken_argmax(std::span<const double> values);
std::size_t tie_broken_argmin(std::span<const double> values);

/// Geometric annealing of the softmax temperature: t0 * factor^floor(k / every).
struct SmoothingSchedule {
  double initial_temperature = 1.0;
  double factor = 0.5;
  std::size_t every = 50;

  double temperature(std::size_t iteration) const;
};

struct FixedPointOptions {
  /// Weight λ of the new forward pass in m ← (1-λ) m + λ m̂.
  double damping = 0.5;
  std::size_t max_iterations = 500;
  /// Stop when sup_t ‖m^{k+1}_t - m^k_t‖₁ falls to this level.
  double tolerance = 1e-8;
  std::optional<SmoothingSchedule> smoothing;

  void validate() const;
};

struct BellmanResult {
  ValueTable values;
  PolicyTrajectory policy;
};

/// An equilibrium candidate: the policy, the trajectory it generates from m0,
/// and the values along that trajectory.
struct MfeSolution {
  PolicyTrajectory policy;
  MeanFieldTrajectory mean_field;
  ValueTable values;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Softmax smoothing was active in the final iterate.
  bool smoothed = false;
  double final_temperature = 0.0;
  std::vector<double> residual_history;
};

/// softmax(values / temperature) into `out`.
void softmax(std::span<const double> values, double temperature, std::span<double> out);

}  // namespace mfg
