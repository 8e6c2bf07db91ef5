#include "mfg/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mfg/errors.hpp"

namespace mfg {

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Matrix::resize(std::size_t rows, std::size_t cols, double fill) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, fill);
}

void check_simplex(std::span<const double> mass, double tolerance) {
  if (mass.empty()) fail(ErrorCode::InvalidDistribution, "empty distribution");
  double total = 0.0;
  for (std::size_t x = 0; x < mass.size(); ++x) {
    if (!std::isfinite(mass[x])) {
      fail(ErrorCode::InvalidDistribution, "non-finite mass at index " + std::to_string(x));
    }
    if (mass[x] < -kClampTolerance) {
      std::ostringstream os;
      os << "negative mass " << mass[x] << " at index " << x;
      fail(ErrorCode::InvalidDistribution, os.str());
    }
    total += mass[x];
  }
  if (std::abs(total - 1.0) > tolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "total mass " << total << " differs from 1 by more than " << tolerance;
    fail(ErrorCode::InvalidDistribution, os.str());
  }
}

bool is_on_simplex(std::span<const double> mass, double tolerance, double negative_slack) {
  double total = 0.0;
  for (double v : mass) {
    if (!std::isfinite(v) || v < -negative_slack) return false;
    total += v;
  }
  return !mass.empty() && std::abs(total - 1.0) <= tolerance;
}

SimplexVector::SimplexVector(std::vector<double> mass, double tolerance)
    : mass_(std::move(mass)), tolerance_(tolerance) {
  check_simplex(mass_, tolerance_);
}

SimplexVector SimplexVector::uniform(std::size_t states) {
  if (states == 0) fail(ErrorCode::InvalidDistribution, "uniform over zero states");
  return SimplexVector(std::vector<double>(states, 1.0 / static_cast<double>(states)));
}

SimplexVector SimplexVector::point_mass(std::size_t states, std::size_t at) {
  if (at >= states) fail(ErrorCode::InvalidDistribution, "point mass index out of range");
  std::vector<double> m(states, 0.0);
  m[at] = 1.0;
  return SimplexVector(std::move(m));
}

std::vector<double> SimplexVector::values() const {
  std::vector<double> out(mass_.size());
  for (std::size_t x = 0; x < mass_.size(); ++x) out[x] = (*this)[x];
  return out;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::ShapeMismatch, "l1_distance: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

double linf_norm(std::span<const double> a) {
  double d = 0.0;
  for (double v : a) d = std::max(d, std::abs(v));
  return d;
}

double sum(std::span<const double> a) { return std::accumulate(a.begin(), a.end(), 0.0); }

void renormalize(std::span<double> mass) {
  double total = 0.0;
  for (double& v : mass) {
    if (v < 0.0) v = 0.0;
    total += v;
  }
  if (total <= 0.0) fail(ErrorCode::InvalidDistribution, "renormalize: no positive mass left");
  for (double& v : mass) v /= total;
}

std::vector<double> project_to_simplex(std::span<const double> point) {
  // Sort-based projection (Held, Wolfe, Crowder).
  std::vector<double> sorted(point.begin(), point.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cumulative += sorted[i];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> out(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) out[i] = std::max(point[i] - theta, 0.0);
  return out;
}

StateTable StateTable::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  StateTable t(rows.size(), rows.front().size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != t.states()) fail(ErrorCode::ShapeMismatch, "ragged state table");
    std::copy(rows[k].begin(), rows[k].end(), t.row(k).begin());
  }
  return t;
}

double l1_distance(const StateTable& a, const StateTable& b) {
  if (a.types() != b.types() || a.states() != b.states()) {
    fail(ErrorCode::ShapeMismatch, "l1_distance: table shape mismatch");
  }
  return l1_distance(a.flat(), b.flat());
}

}  // namespace mfg
