#include "mfg/dynamics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "mfg/errors.hpp"

namespace mfg::dynamics {

Protocol parse_protocol(std::string_view name) {
  if (name == "replicator") return Protocol::Replicator;
  if (name == "smith") return Protocol::Smith;
  if (name == "bnn") return Protocol::Bnn;
  if (name == "smoothed-best-response" || name == "sbr" || name == "logit") {
    return Protocol::SmoothedBestResponse;
  }
  fail(ErrorCode::UnknownProtocol, "unknown revision protocol '" + std::string(name) + "'");
}

std::string_view to_string(Protocol protocol) noexcept {
  switch (protocol) {
    case Protocol::Replicator: return "replicator";
    case Protocol::Smith: return "smith";
    case Protocol::Bnn: return "bnn";
    case Protocol::SmoothedBestResponse: return "smoothed-best-response";
  }
  return "unknown";
}

RateKernel protocol_to_kernel(const RevisionProtocol& protocol) {
  if (!protocol.payoff) fail(ErrorCode::InvalidArgument, "revision protocol has no payoff");
  if (protocol.kind == Protocol::SmoothedBestResponse && !(protocol.temperature > 0.0)) {
    fail(ErrorCode::InvalidArgument, "smoothed best response needs temperature > 0");
  }
  return [protocol](double, std::span<const double> m, Matrix& L) {
    const std::size_t n = m.size();
    L.resize(n, n);
    std::vector<double> r(n);
    protocol.payoff(m, r);
    switch (protocol.kind) {
      case Protocol::Replicator:
        for (std::size_t x = 0; x < n; ++x)
          for (std::size_t y = 0; y < n; ++y)
            if (y != x) L(x, y) = std::max(m[y], 0.0) * std::max(r[y] - r[x], 0.0);
        break;
      case Protocol::Smith:
        for (std::size_t x = 0; x < n; ++x)
          for (std::size_t y = 0; y < n; ++y)
            if (y != x) L(x, y) = std::max(r[y] - r[x], 0.0);
        break;
      case Protocol::Bnn: {
        double average = 0.0;
        for (std::size_t z = 0; z < n; ++z) average += m[z] * r[z];
        for (std::size_t x = 0; x < n; ++x)
          for (std::size_t y = 0; y < n; ++y)
            if (y != x) L(x, y) = std::max(r[y] - average, 0.0);
        break;
      }
      case Protocol::SmoothedBestResponse: {
        const double top = *std::max_element(r.begin(), r.end());
        std::vector<double> w(n);
        double total = 0.0;
        for (std::size_t y = 0; y < n; ++y) total += (w[y] = std::exp((r[y] - top) / protocol.temperature));
        for (std::size_t x = 0; x < n; ++x)
          for (std::size_t y = 0; y < n; ++y) L(x, y) = w[y] / total;
        break;
      }
    }
  };
}

RateKernel with_mutation(RateKernel kernel, double epsilon) {
  if (epsilon < 0.0) fail(ErrorCode::InvalidArgument, "mutation rate must be >= 0");
  if (epsilon == 0.0) return kernel;
  return [kernel = std::move(kernel), epsilon](double t, std::span<const double> m, Matrix& L) {
    kernel(t, m, L);
    const double share = epsilon / static_cast<double>(m.size());
    for (std::size_t x = 0; x < m.size(); ++x)
      for (std::size_t y = 0; y < m.size(); ++y)
        if (y != x) L(x, y) += share;
  };
}

std::vector<double> mean_field_drift(const Matrix& L, std::span<const double> m) {
  const std::size_t n = m.size();
  if (L.rows() != n || L.cols() != n) fail(ErrorCode::ShapeMismatch, "rate kernel shape");
  std::vector<double> drift(n, 0.0);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      const double rate = L(x, y);
      if (rate < -kClampTolerance) {
        fail(ErrorCode::NegativeRate, "negative switching rate " + std::to_string(rate));
      }
      const double flow = m[x] * rate;
      drift[x] -= flow;
      drift[y] += flow;
    }
  return drift;
}

namespace {

void drift_at(const RateKernel& kernel, double t, std::span<const double> m, Matrix& L,
              std::span<double> out) {
  kernel(t, m, L);
  const auto d = mean_field_drift(L, m);
  std::copy(d.begin(), d.end(), out.begin());
}

}  // namespace

MeanFieldTrajectory integrate_forward(const RateKernel& kernel, const SimplexVector& m0,
                                      const IntegratorConfig& cfg) {
  if (!(cfg.step > 0.0) || !(cfg.horizon > 0.0) || cfg.step > cfg.horizon) {
    fail(ErrorCode::InvalidArgument, "integrator needs 0 < step <= horizon");
  }
  const auto steps = static_cast<std::size_t>(std::max<long long>(1, std::llround(cfg.horizon / cfg.step)));
  const double h = cfg.horizon / static_cast<double>(steps);
  const std::size_t n = m0.size();

  MeanFieldTrajectory traj;
  traj.times.reserve(steps + 1);
  traj.points.reserve(steps + 1);
  std::vector<double> m = m0.values();
  Population p(1, n);
  auto record = [&](double t) {
    std::copy(m.begin(), m.end(), p.row(0).begin());
    traj.times.push_back(t);
    traj.points.push_back(p);
  };
  record(0.0);

  Matrix L;
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * h;
    if (cfg.method == Method::ExplicitEuler) {
      drift_at(kernel, t, m, L, k1);
      for (std::size_t x = 0; x < n; ++x) m[x] += h * k1[x];
    } else {
      drift_at(kernel, t, m, L, k1);
      for (std::size_t x = 0; x < n; ++x) tmp[x] = m[x] + 0.5 * h * k1[x];
      drift_at(kernel, t + 0.5 * h, tmp, L, k2);
      for (std::size_t x = 0; x < n; ++x) tmp[x] = m[x] + 0.5 * h * k2[x];
      drift_at(kernel, t + 0.5 * h, tmp, L, k3);
      for (std::size_t x = 0; x < n; ++x) tmp[x] = m[x] + h * k3[x];
      drift_at(kernel, t + h, tmp, L, k4);
      for (std::size_t x = 0; x < n; ++x) m[x] += h / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
    }
    for (std::size_t x = 0; x < n; ++x) {
      if (!std::isfinite(m[x]) || std::abs(m[x]) > 2.0) {
        fail(ErrorCode::StepUnstable, "mass left [-2, 2] at t=" + std::to_string(t + h) +
                                          "; reduce the step");
      }
    }
    if (cfg.renormalize) renormalize(m);
    record(static_cast<double>(s + 1) * h);
  }
  return traj;
}

namespace {

// Residual map in the chart z -> (z, 1 - Σz), restricted to the first n-1 coordinates.
struct ReducedProblem {
  const RateKernel& kernel;
  std::size_t n;
  mutable Matrix L;

  std::vector<double> lift(const Eigen::VectorXd& z) const {
    std::vector<double> m(n);
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      m[i] = z[static_cast<Eigen::Index>(i)];
      rest -= m[i];
    }
    m[n - 1] = rest;
    return m;
  }

  std::vector<double> full_drift(std::span<const double> m) const {
    kernel(0.0, m, L);
    return mean_field_drift(L, m);
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& z) const {
    const auto d = full_drift(lift(z));
    Eigen::VectorXd g(static_cast<Eigen::Index>(n - 1));
    for (std::size_t i = 0; i + 1 < n; ++i) g[static_cast<Eigen::Index>(i)] = d[i];
    return g;
  }
};

}  // namespace

RestPointResult find_rest_points(const RateKernel& kernel, std::span<const SimplexVector> seeds,
                                 double tol, const RestPointOptions& options) {
  if (seeds.empty()) fail(ErrorCode::InvalidArgument, "find_rest_points needs at least one seed");
  RestPointResult result;
  for (const SimplexVector& seed : seeds) {
    const std::size_t n = seed.size();
    SeedOutcome outcome;
    std::vector<double> m = seed.values();
    ReducedProblem problem{kernel, n, {}};

    auto drift_norm = [&](std::span<const double> point) { return linf_norm(problem.full_drift(point)); };
    double residual = drift_norm(m);
    double lambda = 1e-3;
    std::size_t it = 0;
    while (residual > tol && it < options.max_iterations && n > 1) {
      ++it;
      Eigen::VectorXd z(static_cast<Eigen::Index>(n - 1));
      for (std::size_t i = 0; i + 1 < n; ++i) z[static_cast<Eigen::Index>(i)] = m[i];
      const Eigen::VectorXd g = problem.residual(z);
      Eigen::MatrixXd J(g.size(), z.size());
      const double h = 1e-7;
      for (Eigen::Index j = 0; j < z.size(); ++j) {
        Eigen::VectorXd zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        J.col(j) = (problem.residual(zp) - problem.residual(zm)) / (2.0 * h);
      }
      bool improved = false;
      for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
        Eigen::MatrixXd A = J.transpose() * J;
        A.diagonal().array() += lambda * (1.0 + A.diagonal().array());
        const Eigen::VectorXd delta = A.ldlt().solve(-J.transpose() * g);
        const auto candidate = project_to_simplex(problem.lift(z + delta));
        const double r = drift_norm(candidate);
        if (std::isfinite(r) && r < residual) {
          m = candidate;
          residual = r;
          lambda = std::max(lambda / 3.0, 1e-12);
          improved = true;
        } else {
          lambda *= 4.0;
        }
      }
      if (!improved) break;
    }
    outcome.converged = residual <= tol;
    outcome.residual = residual;
    outcome.iterations = it;
    outcome.point = m;
    if (outcome.converged) {
      bool duplicate = false;
      for (const auto& p : result.points) {
        double d = 0.0;
        for (std::size_t x = 0; x < n; ++x) d = std::max(d, std::abs(p[x] - m[x]));
        if (d <= options.dedup_distance) duplicate = true;
      }
      if (!duplicate) {
        renormalize(m);
        result.points.emplace_back(m);
      }
    }
    result.seeds.push_back(std::move(outcome));
  }
  return result;
}

RateKernel scenario_protocol_kernel(const ScenarioModel& scenario, Protocol protocol,
                                    double temperature) {
  if (scenario.space.type_count() != 1) {
    fail(ErrorCode::ShapeMismatch, "evolutionary dynamics need a single-type scenario");
  }
  return protocol_to_kernel(RevisionProtocol{protocol, temperature, state_payoff(scenario)});
}

ScenarioModel revision_scenario(const ScenarioModel& base, const RevisionSpec& spec) {
  if (base.horizon.mode != KernelMode::ContinuousRate) {
    fail(ErrorCode::ModeMismatch, "revision kernels need a continuous horizon");
  }
  if (!(spec.mutation >= 0.0)) fail(ErrorCode::NegativeRate, "mutation rate must be >= 0");
  const Protocol protocol = parse_protocol(spec.protocol);
  if (protocol == Protocol::SmoothedBestResponse && !(spec.temperature > 0.0)) {
    fail(ErrorCode::InvalidArgument, "smoothed best response needs temperature > 0");
  }
  RateKernel rates = scenario_protocol_kernel(base, protocol, spec.temperature);
  if (spec.mutation > 0.0) rates = with_mutation(std::move(rates), spec.mutation);
  auto payoff = state_payoff(base);

  ScenarioModel out;
  out.name = base.name;
  out.space = StateSpace::uniform(base.space.states, {"revise"}, base.space.types);
  out.horizon = base.horizon;
  out.m0 = base.m0;
  out.type_shares = base.type_shares;
  out.clock_rate = base.clock_rate;
  out.revision = spec;
  const std::size_t n = base.space.state_count();
  out.kernel.mode = KernelMode::ContinuousRate;
  out.kernel.row = [rates, n](double t, std::size_t, std::size_t x, std::size_t,
                              const Population& m, std::span<double> row) {
    Matrix L(n, n);
    rates(t, m.row(0), L);
    double total = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      row[y] = L(x, y);
      total += L(x, y);
    }
    row[x] = -total;
  };
  out.payoff.running = [payoff, n](double, std::size_t, std::size_t x, std::size_t,
                                   const Population& m) {
    std::vector<double> r(n);
    payoff(m.row(0), r);
    return r[x];
  };
  out.payoff.terminal = base.payoff.terminal;
  return validate_scenario(std::move(out));
}

}  // namespace mfg::dynamics
