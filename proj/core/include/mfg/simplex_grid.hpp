#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "mfg/scenario.hpp"

namespace mfg::hjb {

/// Points of Δ(X) whose coordinates are multiples of 1/k, with barycentric
/// interpolation over the Freudenthal triangulation.
class SimplexGrid {
 public:
  static constexpr std::size_t kMaxStates = 4;

  SimplexGrid(std::size_t states, std::size_t resolution);

  /// C(k + |X| - 1, |X| - 1)
  static std::size_t expected_size(std::size_t states, std::size_t resolution);

  std::size_t size() const noexcept { return counts_.size(); }
  std::size_t states() const noexcept { return states_; }
  std::size_t resolution() const noexcept { return k_; }

  std::span<const int> counts(std::size_t i) const { return counts_[i]; }
  std::vector<double> point(std::size_t i) const;
  /// Index of the grid point with the given counts; -1 if absent.
  long index_of(std::span<const int> counts) const;

  struct Stencil {
    std::array<std::size_t, kMaxStates> vertex{};
    std::array<double, kMaxStates> weight{};
    std::size_t size = 0;
  };

  /// Vertices and barycentric weights of the cell containing `m`.
  Stencil locate(std::span<const double> m) const;
  double interpolate(std::span<const double> values, std::span<const double> m) const;

 private:
  std::size_t states_;
  std::size_t k_;
  std::vector<std::vector<int>> counts_;
  std::unordered_map<long, std::size_t> index_;

  long key(std::span<const int> counts) const;
};

/// Planner problem sup_u [ ḡ(m_T) + ∫ r̄(u, m) dt ] over a finite set of
/// stationary controls, where r̄ = Σ_x m(x) Σ_a u(a|x) r(x, a, m),
/// ḡ = Σ_x m(x) g(x, m), and m follows the mean-field drift under u.
struct ControlSolution {
  SimplexGrid grid;
  std::vector<double> times;
  /// values[t][grid point]
  std::vector<std::vector<double>> values;
  /// control index per [t][grid point], t < last
  std::vector<std::vector<std::size_t>> control;

  double value_at(std::size_t t, std::span<const double> m) const;
};

/// Clamp slack for Euler steps that leave the simplex.
inline constexpr double kOffSimplexSlack = 1e-8;

ControlSolution solve_mf_control_simplex_dp(const ScenarioModel& scenario,
                                            const std::vector<StagePolicy>& controls,
                                            std::size_t resolution, double dt);

}  // namespace mfg::hjb
