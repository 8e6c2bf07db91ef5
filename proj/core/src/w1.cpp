#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "mfg/errors.hpp"
#include "mfg/mkv.hpp"

namespace mfg::mkv {

EmpiricalCdf::EmpiricalCdf(std::vector<double> points, std::vector<double> weights) {
  if (points.empty()) fail(ErrorCode::InvalidArgument, "empirical CDF needs at least one point");
  if (weights.empty()) weights.assign(points.size(), 1.0 / static_cast<double>(points.size()));
  if (weights.size() != points.size()) fail(ErrorCode::ShapeMismatch, "one weight per point");
  for (double p : points)
    if (!std::isfinite(p)) fail(ErrorCode::NonFiniteValue, "empirical CDF point is not finite");
  check_simplex(weights);

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
  double level = 0.0;
  for (std::size_t i : order) {
    level += std::max(0.0, weights[i]);
    if (!support_.empty() && support_.back() == points[i]) {
      levels_.back() = level;
    } else {
      support_.push_back(points[i]);
      levels_.push_back(level);
    }
  }
  const double total = levels_.back();
  for (double& l : levels_) l = std::min(1.0, l / total);
  levels_.back() = 1.0;
}

double EmpiricalCdf::operator()(double w) const {
  const auto it = std::upper_bound(support_.begin(), support_.end(), w);
  if (it == support_.begin()) return 0.0;
  return levels_[static_cast<std::size_t>(it - support_.begin()) - 1];
}

EmpiricalCdf empirical_cdf(const std::vector<double>& positions, const std::vector<double>& weights) {
  return EmpiricalCdf(positions, weights);
}

AnalyticCdf gaussian_cdf(double mean, double variance) {
  if (!(variance > 0.0)) fail(ErrorCode::InvalidArgument, "Gaussian CDF needs variance > 0");
  const double sd = std::sqrt(variance);
  return {[mean, sd](double w) { return 0.5 * std::erfc(-(w - mean) / (sd * std::sqrt(2.0))); }, mean, sd};
}

double w1_distance(const EmpiricalCdf& f, const EmpiricalCdf& g) {
  const auto& a = f.support();
  const auto& b = g.support();
  std::vector<double> breaks;
  breaks.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(breaks));
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double v = std::abs(f(breaks[i]) - g(breaks[i])) * (breaks[i + 1] - breaks[i]);
    const double t = sum + v;
    comp += std::abs(sum) >= v ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

namespace {

using Quadrature = boost::math::quadrature::gauss_kronrod<double, 31>;
constexpr unsigned kMaxDepth = 15;
constexpr double kRelTol = 1e-11;
/// Absolute error budget for the whole integral.
constexpr double kAbsTol = 1e-8;

double integrate_tail(const std::function<double(double)>& h, double lo, double hi) {
  double error = 0.0;
  const double value = Quadrature::integrate(h, lo, hi, kMaxDepth, kRelTol, &error);
  if (!std::isfinite(value) || !std::isfinite(error)) {
    fail(ErrorCode::NonIntegrable, "|F - G| is not integrable on the tail");
  }
  return value;
}

/// Bisects until the Kronrod error estimate meets the absolute budget `tol`.
template <class F>
double integrate_piece(const F& h, double lo, double hi, double tol, unsigned depth) {
  if (!(hi > lo)) return 0.0;
  double error = 0.0;
  const double value = Quadrature::integrate(h, lo, hi, 0, 0.0, &error);
  if (error <= tol || depth == 0) return value;
  const double mid = 0.5 * (lo + hi);
  return integrate_piece(h, lo, mid, 0.5 * tol, depth - 1) + integrate_piece(h, mid, hi, 0.5 * tol, depth - 1);
}

}  // namespace

double w1_distance(const EmpiricalCdf& f, const AnalyticCdf& g) {
  const auto& pts = f.support();
  const auto& lv = f.levels();
  const double far = 1e6 * std::max(1.0, g.scale);
  if (g.cdf(g.center - far) > 1e-12 || g.cdf(g.center + far) < 1.0 - 1e-12) {
    fail(ErrorCode::NonIntegrable, "analytic CDF does not reach 0 and 1 in its tails");
  }
  const double inf = std::numeric_limits<double>::infinity();
  double total = integrate_tail([&](double w) { return g.cdf(w); }, -inf, pts.front());
  total += integrate_tail([&](double w) { return 1.0 - g.cdf(w); }, pts.back(), inf);
  const double span = pts.back() - pts.front();

  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double level = lv[i];
    const double lo = pts[i];
    const double hi = pts[i + 1];
    auto gap = [&](double w) { return std::abs(level - g.cdf(w)); };
    const double budget = 0.5 * kAbsTol * (hi - lo) / span;
    const double g_lo = g.cdf(lo) - level;
    const double g_hi = g.cdf(hi) - level;
    if (g_lo < 0.0 && g_hi > 0.0) {
      double a = lo, b = hi;
      for (int it = 0; it < 200 && b - a > 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        (g.cdf(mid) < level ? a : b) = mid;
      }
      const double cross = 0.5 * (a + b);
      total += integrate_piece(gap, lo, cross, 0.5 * budget, kMaxDepth) +
               integrate_piece(gap, cross, hi, 0.5 * budget, kMaxDepth);
    } else {
      total += integrate_piece(gap, lo, hi, budget, kMaxDepth);
    }
  }
  return total;
}

}  // namespace mfg::mkv
