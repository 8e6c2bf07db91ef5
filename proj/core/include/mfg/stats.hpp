#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace mfg {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Sample mean and standard error, accumulated in index order.
MeanEstimate estimate_mean(std::span<const double> samples);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);
/// Slope of log y against log x.
LinearFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; mixes a seed with stream coordinates.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) noexcept;
inline Engine make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) {
  return Engine(derive_seed(seed, a, b, c));
}

/// Worker count: `requested` if nonzero, else MFGKIT_THREADS, else 1.
std::size_t resolve_threads(std::size_t requested);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into index-addressed slots so
/// the outcome never depends on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace mfg
