#include "mfg/equilibrium.hpp"

#include <algorithm>
#include <cmath>

#include "mfg/errors.hpp"

namespace mfg {

std::size_t tie_broken_argmax(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::EmptyActionSet, "argmax over an empty set");
  const double best = *std::max_element(values.begin(), values.end());
  const double slack = kArgmaxTieTolerance * std::max(1.0, std::abs(best));
  for (std::size_t a = 0; a < values.size(); ++a)
    if (values[a] >= best - slack) return a;
  return 0;
}

std::size_t tie_broken_argmin(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::EmptyActionSet, "argmin over an empty set");
  const double best = *std::min_element(values.begin(), values.end());
  const double slack = kArgmaxTieTolerance * std::max(1.0, std::abs(best));
  for (std::size_t a = 0; a < values.size(); ++a)
    if (values[a] <= best + slack) return a;
  return 0;
}

double SmoothingSchedule::temperature(std::size_t iteration) const {
  const auto halvings = static_cast<double>(every == 0 ? 0 : iteration / every);
  return initial_temperature * std::pow(factor, halvings);
}

void FixedPointOptions::validate() const {
  if (!(damping > 0.0) || damping > 1.0) fail(ErrorCode::InvalidArgument, "damping must lie in (0, 1]");
  if (!(tolerance > 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be > 0");
  if (max_iterations == 0) fail(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (smoothing) {
    if (!(smoothing->initial_temperature > 0.0) || !(smoothing->factor > 0.0) ||
        smoothing->factor > 1.0) {
      fail(ErrorCode::InvalidArgument, "smoothing needs temperature > 0 and factor in (0, 1]");
    }
  }
}

void softmax(std::span<const double> values, double temperature, std::span<double> out) {
  const double top = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (std::size_t a = 0; a < values.size(); ++a)
    total += (out[a] = std::exp((values[a] - top) / temperature));
  for (std::size_t a = 0; a < values.size(); ++a) out[a] /= total;
}

}  // namespace mfg
