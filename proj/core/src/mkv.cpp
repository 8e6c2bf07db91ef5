#include "mfg/mkv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "mfg/errors.hpp"

namespace mfg::mkv {

MkvModel ou_model(double a, double b, double s, double mean0, double var0) {
  MkvModel m;
  m.name = "ou";
  m.drift = [a, b](double, double x, double, double w) { return a * (w - x) + b; };
  m.volatility = [s](double, double, double, double) { return s; };
  m.affine_drift = AffineForm{[a, b](double, double x, double) { return b - a * x; },
                              [a](double, double, double) { return a; }};
  m.affine_volatility = AffineForm{[s](double, double, double) { return s; },
                                   [](double, double, double) { return 0.0; }};
  m.initial_mean = mean0;
  m.initial_variance = var0;
  return m;
}

MkvModel pure_drift_model(double c, double mean0, double var0) {
  MkvModel m;
  m.name = "pure-drift";
  m.drift = [c](double, double, double, double) { return c; };
  m.volatility = [](double, double, double, double) { return 0.0; };
  m.affine_drift = AffineForm{[c](double, double, double) { return c; },
                              [](double, double, double) { return 0.0; }};
  m.affine_volatility = AffineForm{[](double, double, double) { return 0.0; },
                                   [](double, double, double) { return 0.0; }};
  m.initial_mean = mean0;
  m.initial_variance = var0;
  return m;
}

void check_weights(const Matrix& weights, std::size_t n) {
  if (weights.rows() != n || weights.cols() != n) {
    fail(ErrorCode::ShapeMismatch, "weight matrix must be " + std::to_string(n) + " x " + std::to_string(n));
  }
  for (std::size_t j = 0; j < n; ++j) {
    double column = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(weights(i, j) >= 0.0)) fail(ErrorCode::InvalidArgument, "weights must be nonnegative");
      column += weights(i, j);
    }
    if (std::abs(column - 1.0) > 1e-9) {
      fail(ErrorCode::InvalidArgument, "weights seen by particle " + std::to_string(j) + " sum to " +
                                           std::to_string(column));
    }
  }
}

namespace {

std::size_t step_count(double dt, double T) {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::StepInvalid, "step must be > 0");
  if (!(T >= 0.0) || !std::isfinite(T)) fail(ErrorCode::StepInvalid, "horizon must be >= 0");
  const double ratio = T / dt;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-6 * std::max(1.0, ratio)) {
    fail(ErrorCode::StepInvalid, "T / dt = " + std::to_string(ratio) + " is not an integer");
  }
  return static_cast<std::size_t>(steps);
}

class Neumaier {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace

ParticleEnsemble simulate_particles(const MkvModel& model, std::size_t n, double dt, double T,
                                    std::uint64_t seed, const SimOptions& options) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "need at least one particle");
  const std::size_t steps = step_count(dt, T);
  if (!model.affine_drift && !model.drift) fail(ErrorCode::InvalidArgument, "model has no drift");
  if (!model.affine_volatility && !model.volatility) fail(ErrorCode::InvalidArgument, "model has no volatility");
  if (model.weights) check_weights(*model.weights, n);
  if (!options.streams.empty() && options.streams.size() != n) {
    fail(ErrorCode::ShapeMismatch, "need one stream id per particle");
  }
  if (model.initial_positions.empty() && !(model.initial_variance >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "initial variance must be >= 0");
  }

  std::vector<Engine> engines;
  engines.reserve(n);
  for (std::size_t j = 0; j < n; ++j)
    engines.push_back(make_stream(seed, options.replication, options.streams.empty() ? j : options.streams[j]));
  std::vector<boost::random::normal_distribution<double>> normals(n);

  std::vector<double> x(n);
  const double sd0 = std::sqrt(model.initial_variance);
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = model.initial_positions.empty() ? model.initial_mean + sd0 * normals[j](engines[j])
                                           : model.initial_positions[j % model.initial_positions.size()];
  }

  ParticleEnsemble out;
  out.dt = dt;
  out.seed = seed;
  out.replication = options.replication;
  out.times.push_back(0.0);
  out.positions.push_back(x);

  const double sqrt_dt = std::sqrt(dt);
  const double uniform = 1.0 / static_cast<double>(n);
  std::vector<double> next(n), u(n), weighted_mean(n);
  // One Gaussian per particle per step, drawn a block of steps at a time so each
  // engine's state stays in cache while it is used.
  constexpr std::size_t kNoiseBlock = 64;
  std::vector<double> noise(n * kNoiseBlock);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const std::size_t slot = k % kNoiseBlock;
    if (slot == 0) {
      const std::size_t width = std::min(kNoiseBlock, steps - k);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t b = 0; b < width; ++b) noise[j * kNoiseBlock + b] = normals[j](engines[j]);
    }
    for (std::size_t j = 0; j < n; ++j) u[j] = model.control ? model.control(t, x[j]) : 0.0;

    const bool affine = model.affine_drift && model.affine_volatility;
    if (affine) {
      if (model.weights) {
        for (std::size_t j = 0; j < n; ++j) {
          Neumaier s;
          for (std::size_t i = 0; i < n; ++i) s.add((*model.weights)(i, j) * x[i]);
          weighted_mean[j] = s.value();
        }
      } else {
        Neumaier s;
        for (double v : x) s.add(v);
        std::fill(weighted_mean.begin(), weighted_mean.end(), s.value() * uniform);
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      double f = 0.0;
      double sigma = 0.0;
      if (affine) {
        f = model.affine_drift->intercept(t, x[j], u[j]) + model.affine_drift->slope(t, x[j], u[j]) * weighted_mean[j];
        sigma = model.affine_volatility->intercept(t, x[j], u[j]) +
                model.affine_volatility->slope(t, x[j], u[j]) * weighted_mean[j];
      } else {
        Neumaier fs, ss;
        for (std::size_t i = 0; i < n; ++i) {
          const double w = model.weights ? (*model.weights)(i, j) : uniform;
          if (w == 0.0) continue;
          fs.add(w * model.drift(t, x[j], u[j], x[i]));
          ss.add(w * model.volatility(t, x[j], u[j], x[i]));
        }
        f = fs.value();
        sigma = ss.value();
      }
      next[j] = x[j] + dt * f + sigma * sqrt_dt * noise[j * kNoiseBlock + slot];
      if (!std::isfinite(next[j]) || std::abs(next[j]) > kBlowupBound) {
        fail(ErrorCode::NumericalBlowup, "particle " + std::to_string(j) + " reached " +
                                             std::to_string(next[j]) + " at t=" + std::to_string(t + dt));
      }
    }
    x.swap(next);
    const bool last = k + 1 == steps;
    if (last || (options.record_stride > 0 && (k + 1) % options.record_stride == 0)) {
      out.times.push_back(static_cast<double>(k + 1) * dt);
      out.positions.push_back(x);
    }
  }
  return out;
}

OuMoments ou_oracle(double a, double b, double s, double mean0, double var0, double t) {
  if (!(a > 0.0)) fail(ErrorCode::InvalidArgument, "OU oracle needs a > 0");
  for (double v : {b, s, mean0, var0, t})
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "OU oracle parameter is not finite");
  const double decay = std::exp(-2.0 * a * t);
  return {mean0 + b * t, var0 * decay - s * s / (2.0 * a) * std::expm1(-2.0 * a * t)};
}

namespace {

// Exact zero errors (frozen dynamics) leave the slope undefined.
LinearFit loglog_or_nan(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (std::any_of(ys.begin(), ys.end(), [](double y) { return !(y > 0.0); })) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }
  return fit_loglog(xs, ys);
}

}  // namespace

MkvRateReport rate_study(const MkvModel& model, const std::vector<std::size_t>& ns,
                         const std::vector<double>& dts, double T, std::size_t reps,
                         std::uint64_t seed, const RateReference& reference, std::size_t threads) {
  if (reps < kMinMkvReplications) {
    fail(ErrorCode::InsufficientReplications,
         std::to_string(reps) + " replications; need at least " + std::to_string(kMinMkvReplications));
  }
  if (ns.size() < 2 || dts.size() < 2) fail(ErrorCode::InvalidArgument, "rate study needs >= 2 n and >= 2 dt values");
  const std::size_t n_max = *std::max_element(ns.begin(), ns.end());
  const double dt_min = *std::min_element(dts.begin(), dts.end());

  MkvRateReport report;
  std::optional<EmpiricalCdf> fine;
  if (reference.analytic) {
    report.reference = "analytic";
  } else if (reference.empirical) {
    report.reference = "empirical";
  } else {
    report.reference = "fine-grid";
    const auto run = simulate_particles(model, 4 * n_max, dt_min / 16.0, T, derive_seed(seed, 0xfeed));
    fine = empirical_cdf(run.final_positions());
  }
  auto distance = [&](const std::vector<double>& positions) {
    const EmpiricalCdf f = empirical_cdf(positions);
    if (reference.analytic) return w1_distance(f, *reference.analytic);
    return w1_distance(f, reference.empirical ? *reference.empirical : *fine);
  };

  std::uint64_t cell = 1;
  auto run_cell = [&](std::size_t n, double dt) {
    std::vector<double> errors(reps);
    const std::uint64_t cell_seed = derive_seed(seed, cell++);
    parallel_for(reps, resolve_threads(threads), [&](std::size_t r) {
      SimOptions opts;
      opts.replication = r;
      errors[r] = distance(simulate_particles(model, n, dt, T, cell_seed, opts).final_positions());
    });
    return RateCell{n, dt, estimate_mean(errors)};
  };

  std::vector<double> xs, ys;
  for (std::size_t n : ns) {
    report.by_n.push_back(run_cell(n, dt_min));
    xs.push_back(static_cast<double>(n));
    ys.push_back(report.by_n.back().error.mean);
  }
  report.n_fit = loglog_or_nan(xs, ys);
  xs.clear();
  ys.clear();
  for (double dt : dts) {
    const auto shared = std::find_if(report.by_n.begin(), report.by_n.end(),
                                     [&](const RateCell& c) { return c.n == n_max && c.dt == dt; });
    report.by_dt.push_back(shared != report.by_n.end() ? *shared : run_cell(n_max, dt));
    xs.push_back(dt);
    ys.push_back(report.by_dt.back().error.mean);
  }
  report.dt_fit = loglog_or_nan(xs, ys);
  return report;
}

}  // namespace mfg::mkv
