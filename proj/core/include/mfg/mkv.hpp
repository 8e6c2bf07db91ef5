#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfg/simplex.hpp"
#include "mfg/stats.hpp"

namespace mfg::mkv {

/// f(t, x, u, w) or σ(t, x, u, w): own state x, control u, neighbour state w.
using InteractionFn = std::function<double(double t, double x, double u, double w)>;
using ControlFn = std::function<double(double t, double x)>;

/// intercept(t, x, u) + slope(t, x, u) * w; lets the weighted average over
/// neighbours collapse to one weighted mean.
struct AffineForm {
  std::function<double(double t, double x, double u)> intercept;
  std::function<double(double t, double x, double u)> slope;
};

struct MkvModel {
  std::string name = "custom";
  InteractionFn drift;
  InteractionFn volatility;
  /// Used instead of drift / volatility when present.
  std::optional<AffineForm> affine_drift;
  std::optional<AffineForm> affine_volatility;
  /// Feedback control; zero when empty.
  ControlFn control;
  /// weights(i, j) = ω̄_ij, the weight of particle i seen by particle j;
  /// uniform 1/n when absent. Columns sum to one.
  std::optional<Matrix> weights;
  /// Gaussian initial law unless `initial_positions` is nonempty, in which case
  /// particle j starts at initial_positions[j mod size].
  double initial_mean = 0.0;
  double initial_variance = 1.0;
  std::vector<double> initial_positions;
};

/// f = a (w - x) + b, σ = s.
MkvModel ou_model(double a, double b, double s, double mean0 = 0.0, double var0 = 1.0);
/// f = c, σ = 0.
MkvModel pure_drift_model(double c, double mean0 = 0.0, double var0 = 1.0);

/// Throws InvalidArgument unless the weights are nonnegative with unit column sums.
void check_weights(const Matrix& weights, std::size_t n);

struct SimOptions {
  /// Record every `record_stride` steps (the final time is always kept).
  std::size_t record_stride = 0;
  /// Stream index of the replication; particle j draws from make_stream(seed, replication, stream_j).
  std::uint64_t replication = 0;
  /// Per-particle stream ids; defaults to 0..n-1.
  std::vector<std::uint64_t> streams;
};

struct ParticleEnsemble {
  std::vector<double> times;
  /// positions[k][j] at times[k].
  std::vector<std::vector<double>> positions;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;

  const std::vector<double>& final_positions() const { return positions.back(); }
};

inline constexpr double kBlowupBound = 1e12;

/// x_j += dt Σ_i ω̄_ij f(x_j, u_j, x_i) + (Σ_i ω̄_ij σ(x_j, u_j, x_i)) ΔB_j with
/// ΔB_j ~ N(0, dt) independent per particle and step.
ParticleEnsemble simulate_particles(const MkvModel& model, std::size_t n, double dt, double T,
                                    std::uint64_t seed, const SimOptions& options = {});

/// Right-continuous weighted step CDF.
class EmpiricalCdf {
 public:
  EmpiricalCdf() = default;
  /// Equal weights 1/n when `weights` is empty.
  explicit EmpiricalCdf(std::vector<double> points, std::vector<double> weights = {});

  double operator()(double w) const;
  /// Distinct support points and the CDF value from each point on.
  const std::vector<double>& support() const noexcept { return support_; }
  const std::vector<double>& levels() const noexcept { return levels_; }

 private:
  std::vector<double> support_;
  std::vector<double> levels_;
};

EmpiricalCdf empirical_cdf(const std::vector<double>& positions, const std::vector<double>& weights = {});

struct AnalyticCdf {
  std::function<double(double)> cdf;
  /// Location and scale hints for the tails.
  double center = 0.0;
  double scale = 1.0;
};

AnalyticCdf gaussian_cdf(double mean, double variance);

/// ∫ |F - G| dw, exact for two step functions.
double w1_distance(const EmpiricalCdf& f, const EmpiricalCdf& g);
/// Adaptive Gauss-Kronrod between support points (absolute tolerance ~1e-8);
/// throws NonIntegrable if a tail integral does not converge.
double w1_distance(const EmpiricalCdf& f, const AnalyticCdf& g);

struct OuMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Limit law of f = a (w - x) + b, σ = s: mean0 + b t and
/// var0 e^{-2at} + s² / (2a) (1 - e^{-2at}).
OuMoments ou_oracle(double a, double b, double s, double mean0, double var0, double t);

struct RateCell {
  std::size_t n = 0;
  double dt = 0.0;
  MeanEstimate error;
};

struct MkvRateReport {
  /// Varying n at the smallest dt.
  std::vector<RateCell> by_n;
  /// Varying dt at the largest n.
  std::vector<RateCell> by_dt;
  /// NaN slopes when some mean error is exactly zero.
  LinearFit n_fit;
  LinearFit dt_fit;
  std::string reference;
};

struct RateReference {
  std::optional<AnalyticCdf> analytic;
  std::optional<EmpiricalCdf> empirical;
};

inline constexpr std::size_t kMinMkvReplications = 30;

/// E ‖F(T) - Fⁿ(T)‖₁ over the two one-dimensional sweeps. Without a supplied
/// reference, a run with dt_ref = min(dts) / 16 and n_ref = 4 max(ns) is used.
MkvRateReport rate_study(const MkvModel& model, const std::vector<std::size_t>& ns,
                         const std::vector<double>& dts, double T, std::size_t reps,
                         std::uint64_t seed, const RateReference& reference = {},
                         std::size_t threads = 0);

}  // namespace mfg::mkv
