#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "mfg/bsk.hpp"
#include "mfg/errors.hpp"

namespace mfg::bsk {

namespace {

constexpr double kRawExponentLimit = 600.0;

// log Σ_y w_y e^{L_y} for weights summing to one; exact near L ≡ const.
double weighted_log_sum_exp(std::span<const double> weights, std::span<const double> logs) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < weights.size(); ++y)
    if (weights[y] > 0.0) top = std::max(top, logs[y]);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  double mass = 0.0;
  for (std::size_t y = 0; y < weights.size(); ++y) {
    if (weights[y] <= 0.0) continue;
    acc += weights[y] * std::expm1(logs[y] - top);
    mass += weights[y];
  }
  // Σ w e^{d} = mass + Σ w expm1(d)
  return top + std::log1p((mass - 1.0) + acc);
}

void check_mu(double mu) {
  if (mu == 0.0 || !std::isfinite(mu)) {
    fail(ErrorCode::InvalidArgument, "risk sensitivity must be finite and nonzero");
  }
}

struct Bounds {
  double running = 0.0;
  double terminal = 0.0;
};

Bounds payoff_bounds(const ScenarioModel& scenario, const MeanFieldTrajectory& m_traj) {
  const auto& space = scenario.space;
  Bounds b;
  const std::size_t T = scenario.horizon.stages;
  for (std::size_t k = 0; k < space.type_count(); ++k)
    for (std::size_t x = 0; x < space.state_count(); ++x) {
      b.terminal = std::max(b.terminal, std::abs(scenario.payoff.terminal(k, x, m_traj[T])));
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t a = 0; a < space.action_count(k, x); ++a)
          b.running = std::max(b.running, std::abs(scenario.payoff.running(
                                              static_cast<double>(t), k, x, a, m_traj[t])));
    }
  return b;
}

}  // namespace

BellmanResult risk_sensitive_backward(const ScenarioModel& scenario, double mu,
                                      const MeanFieldTrajectory& m_traj,
                                      const RiskOptions& options) {
  check_mu(mu);
  if (scenario.kernel.mode != KernelMode::DiscreteProbability) {
    fail(ErrorCode::ModeMismatch, "risk-sensitive recursion needs a discrete-probability kernel");
  }
  const std::size_t T = scenario.horizon.stages;
  if (m_traj.size() != T + 1) fail(ErrorCode::GridMismatch, "trajectory does not span the horizon");
  const auto& space = scenario.space;
  const std::size_t types = space.type_count();
  const std::size_t n = space.state_count();

  if (!options.log_space) {
    const Bounds b = payoff_bounds(scenario, m_traj);
    const double exponent = std::abs(mu) * (b.running * static_cast<double>(T) + b.terminal);
    if (exponent > kRawExponentLimit) {
      fail(ErrorCode::Overflow, "|mu * reward * T| = " + std::to_string(exponent) +
                                    " exceeds the raw-space limit; enable log-space");
    }
  }

  // logs[t](k, x) = log W_t(x) = μ v_t(x)
  ValueTable logs(T + 1, StateTable(types, n));
  BellmanResult out;
  out.values.assign(T + 1, StateTable(types, n));
  out.policy.stages.assign(T, StagePolicy(space));
  for (std::size_t k = 0; k < types; ++k)
    for (std::size_t x = 0; x < n; ++x) {
      const double g = scenario.payoff.terminal(k, x, m_traj[T]);
      logs[T](k, x) = mu * g;
      out.values[T](k, x) = g;
    }

  std::vector<double> row(n);
  std::vector<double> raw_next(n);
  for (std::size_t s = T; s-- > 0;) {
    const double time = static_cast<double>(s);
    for (std::size_t k = 0; k < types; ++k) {
      const auto next_logs = logs[s + 1].row(k);
      if (!options.log_space)
        for (std::size_t y = 0; y < n; ++y) raw_next[y] = std::exp(next_logs[y]);
      for (std::size_t x = 0; x < n; ++x) {
        const std::size_t na = space.action_count(k, x);
        std::vector<double> ce(na);  // per-action certainty equivalent
        std::vector<double> lw(na);  // per-action log W
        for (std::size_t a = 0; a < na; ++a) {
          std::fill(row.begin(), row.end(), 0.0);
          scenario.kernel.row(time, k, x, a, m_traj[s], row);
          const double r = scenario.payoff.running(time, k, x, a, m_traj[s]);
          if (options.log_space) {
            lw[a] = mu * r + weighted_log_sum_exp(row, next_logs);
          } else {
            double w = 0.0;
            for (std::size_t y = 0; y < n; ++y) w += row[y] * raw_next[y];
            lw[a] = std::log(std::exp(mu * r) * w);
          }
          ce[a] = lw[a] / mu;
        }
        // Maximizing the certainty equivalent is max W for μ > 0 and min W for μ < 0.
        const std::size_t best = tie_broken_argmax(ce);
        logs[s](k, x) = lw[best];
        out.values[s](k, x) = ce[best];
        if (!std::isfinite(ce[best])) {
          fail(options.log_space ? ErrorCode::NonFiniteValue : ErrorCode::Overflow,
               "risk-sensitive value at t=" + std::to_string(s) + ", state '" + space.states[x] + "'");
        }
        out.policy[s].at(k, x)[best] = 1.0;
      }
    }
  }
  return out;
}

RiskOracleResult enumerate_risk_value_oracle(const ScenarioModel& scenario, double mu,
                                             const PolicyTrajectory& u,
                                             const MeanFieldTrajectory& m_traj) {
  check_mu(mu);
  if (scenario.kernel.mode != KernelMode::DiscreteProbability) {
    fail(ErrorCode::ModeMismatch, "the enumeration oracle needs a discrete-probability kernel");
  }
  const auto& space = scenario.space;
  const std::size_t T = scenario.horizon.stages;
  const std::size_t types = space.type_count();
  const std::size_t n = space.state_count();
  if (m_traj.size() != T + 1 || u.size() < T) {
    fail(ErrorCode::GridMismatch, "policy or trajectory does not span the horizon");
  }
  const double path_bound =
      std::pow(static_cast<double>(n) * static_cast<double>(space.max_actions()),
               static_cast<double>(T));
  if (path_bound > kMaxEnumeratedPaths) {
    fail(ErrorCode::TooLarge, "(|X||A|)^T = " + std::to_string(path_bound) + " exceeds 1e6 paths");
  }

  // rows[t][k][x][a] cached once: the trajectory is fixed.
  std::vector<std::vector<std::vector<std::vector<std::vector<double>>>>> rows(T);
  std::vector<std::vector<std::vector<std::vector<double>>>> rewards(T);
  for (std::size_t t = 0; t < T; ++t) {
    rows[t].resize(types);
    rewards[t].resize(types);
    for (std::size_t k = 0; k < types; ++k) {
      rows[t][k].resize(n);
      rewards[t][k].resize(n);
      for (std::size_t x = 0; x < n; ++x)
        for (std::size_t a = 0; a < space.action_count(k, x); ++a) {
          std::vector<double> row(n, 0.0);
          scenario.kernel.row(static_cast<double>(t), k, x, a, m_traj[t], row);
          rows[t][k][x].push_back(std::move(row));
          rewards[t][k][x].push_back(scenario.payoff.running(static_cast<double>(t), k, x, a, m_traj[t]));
        }
    }
  }

  RiskOracleResult out;
  out.certainty_equivalent = StateTable(types, n);
  out.mean = StateTable(types, n);
  out.variance = StateTable(types, n);

  std::vector<double> probs;
  std::vector<double> totals;
  for (std::size_t k = 0; k < types; ++k)
    for (std::size_t x0 = 0; x0 < n; ++x0) {
      probs.clear();
      totals.clear();
      std::function<void(std::size_t, std::size_t, double, double)> walk =
          [&](std::size_t t, std::size_t x, double p, double reward) {
            if (t == T) {
              probs.push_back(p);
              totals.push_back(reward + scenario.payoff.terminal(k, x, m_traj[T]));
              return;
            }
            const auto act = u[t].at(k, x);
            for (std::size_t a = 0; a < act.size(); ++a) {
              if (act[a] <= 0.0) continue;
              const auto& row = rows[t][k][x][a];
              for (std::size_t y = 0; y < n; ++y)
                if (row[y] > 0.0) walk(t + 1, y, p * act[a] * row[y], reward + rewards[t][k][x][a]);
            }
          };
      walk(0, x0, 1.0, 0.0);
      out.paths += probs.size();

      double mean = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) mean += probs[i] * totals[i];
      double var = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) var += probs[i] * (totals[i] - mean) * (totals[i] - mean);
      // Shift by the extreme total so every exponent is nonpositive.
      double shift = totals.empty() ? 0.0 : totals[0];
      for (double r : totals) shift = mu > 0.0 ? std::max(shift, r) : std::min(shift, r);
      double mass = 0.0;
      double acc = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        mass += probs[i];
        acc += probs[i] * std::expm1(mu * (totals[i] - shift));
      }
      out.mean(k, x0) = mean;
      out.variance(k, x0) = var;
      out.certainty_equivalent(k, x0) = shift + std::log1p((mass - 1.0) + acc) / mu;
    }
  return out;
}

}  // namespace mfg::bsk
