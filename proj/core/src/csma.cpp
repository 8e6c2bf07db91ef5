#include <algorithm>
#include <cmath>

#include "mfg/errors.hpp"
#include "mfg/nplayer.hpp"

namespace mfg::nplayer {

namespace {

std::vector<double> shares_of(const CsmaParams& params) {
  const std::size_t types = params.max_backoff.size();
  if (params.type_shares.empty()) return std::vector<double>(types, 1.0 / static_cast<double>(types));
  return params.type_shares;
}

void check_params(const CsmaParams& params, std::size_t n) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "CSMA needs n >= 1");
  if (params.gamma < 0.0 || params.beta2 < 0.0 || params.beta3 < 0.0) {
    fail(ErrorCode::InvalidArgument, "gamma, beta2 and beta3 must be >= 0");
  }
  if (params.max_backoff.empty()) fail(ErrorCode::ShapeMismatch, "CSMA needs at least one type");
  if (params.attempt.size() != params.max_backoff.size()) {
    fail(ErrorCode::ShapeMismatch, "attempt policy needs one row per type");
  }
  for (std::size_t k = 0; k < params.max_backoff.size(); ++k)
    if (params.attempt[k].size() != params.max_backoff[k] + 1) {
      fail(ErrorCode::ShapeMismatch, "attempt row " + std::to_string(k) + " needs K + 1 = " +
                                         std::to_string(params.max_backoff[k] + 1) + " entries");
    }
  const auto shares = shares_of(params);
  if (shares.size() != params.max_backoff.size()) fail(ErrorCode::ShapeMismatch, "type_shares size");
  check_simplex(shares);
  const double nd = static_cast<double>(n);
  if (!(params.gamma * nd + params.beta2 + params.beta3 * std::log(nd) > 0.0)) {
    fail(ErrorCode::InvalidArgument, "gamma n + beta2 + beta3 ln n must be > 0");
  }
}

}  // namespace

double csma_attempt_probability(const CsmaParams& params, std::size_t type, std::size_t state,
                                std::size_t n) {
  if (state > params.max_backoff.at(type)) return 0.0;
  const double nd = static_cast<double>(n);
  const double scale = params.gamma * nd + params.beta2 + params.beta3 * std::log(nd);
  const double p = params.attempt.at(type).at(state) / scale;
  if (!(p >= 0.0 && p <= 1.0)) {
    fail(ErrorCode::InvalidProbability, "attempt probability " + std::to_string(p) + " for type " +
                                            std::to_string(type) + ", state " + std::to_string(state) +
                                            " is outside [0, 1]");
  }
  return p;
}

ScenarioModel csma_scenario(const CsmaParams& params, std::size_t n, bool mean_field_limit,
                            std::size_t stages) {
  check_params(params, n);
  const std::size_t types = params.max_backoff.size();
  const std::size_t states = *std::max_element(params.max_backoff.begin(), params.max_backoff.end()) + 1;
  const auto shares = shares_of(params);

  std::vector<std::vector<double>> p(types, std::vector<double>(states));
  for (std::size_t k = 0; k < types; ++k)
    for (std::size_t x = 0; x < states; ++x) p[k][x] = csma_attempt_probability(params, k, x, n);
  const auto counts = apportion(n, shares);
  std::vector<double> population(types);
  for (std::size_t k = 0; k < types; ++k)
    population[k] = mean_field_limit ? static_cast<double>(n) * shares[k] : static_cast<double>(counts[k]);

  // Probability that every other node stays silent.
  auto silent = [p, population, mean_field_limit](std::size_t type, std::size_t state,
                                                   const Population& m) {
    double log_silent = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
      for (std::size_t y = 0; y < p[k].size(); ++y) {
        if (p[k][y] == 0.0) continue;
        double others = population[k] * m(k, y);
        if (mean_field_limit) {
          log_silent -= others * p[k][y];
          continue;
        }
        if (k == type && y == state) others -= 1.0;
        others = std::max(others, 0.0);
        if (others == 0.0) continue;
        if (p[k][y] >= 1.0) return 0.0;
        log_silent += others * std::log1p(-p[k][y]);
      }
    return std::exp(log_silent);
  };

  ScenarioModel s;
  s.name = mean_field_limit ? "csma-mean-field" : "csma";
  std::vector<std::string> labels;
  for (std::size_t x = 0; x < states; ++x) labels.push_back(std::to_string(x));
  std::vector<std::string> type_labels;
  if (types == 1) {
    type_labels = {"default"};
  } else {
    for (std::size_t k = 0; k < types; ++k) type_labels.push_back("class" + std::to_string(k));
  }
  s.space = StateSpace::uniform(labels, {"transmit"}, type_labels);
  s.kernel.mode = KernelMode::DiscreteProbability;
  const auto K = params.max_backoff;
  s.kernel.row = [p, K, silent](double, std::size_t type, std::size_t x, std::size_t,
                                const Population& m, std::span<double> out) {
    const double attempt = p[type][x];
    if (x > K[type] || attempt == 0.0) {
      out[x] += 1.0;
      return;
    }
    const double success = silent(type, x, m);
    out[0] += attempt * success;
    out[(x + 1) % (K[type] + 1)] += attempt * (1.0 - success);
    out[x] += 1.0 - attempt;
  };
  s.payoff.running = [p, silent](double, std::size_t type, std::size_t x, std::size_t,
                                 const Population& m) {
    return p[type][x] == 0.0 ? 0.0 : p[type][x] * silent(type, x, m);
  };
  s.payoff.terminal = [](std::size_t, std::size_t, const Population&) { return 0.0; };
  s.horizon.mode = KernelMode::DiscreteProbability;
  s.horizon.stages = stages;
  s.m0 = Population(types, states);
  for (std::size_t k = 0; k < types; ++k) s.m0(k, 0) = 1.0;
  s.type_shares = shares;
  return validate_scenario(std::move(s));
}

Population csma_mean_field_fixed_point(const CsmaParams& params, std::size_t n) {
  const ScenarioModel s = csma_scenario(params, n, true, 1);
  const std::size_t types = s.space.type_count();
  const std::size_t states = s.space.state_count();
  Population m = s.m0;
  std::vector<double> row(states);
  for (std::size_t iter = 0; iter < 10'000'000; ++iter) {
    Population next(types, states);
    for (std::size_t k = 0; k < types; ++k)
      for (std::size_t x = 0; x < states; ++x) {
        if (m(k, x) == 0.0) continue;
        std::fill(row.begin(), row.end(), 0.0);
        s.kernel.row(0.0, k, x, 0, m, row);
        for (std::size_t y = 0; y < states; ++y) next(k, y) += m(k, x) * row[y];
      }
    for (std::size_t k = 0; k < types; ++k) renormalize(next.row(k));
    const double change = l1_distance(next, m);
    m = std::move(next);
    if (change < 1e-15) break;
  }
  return m;
}

CsmaStudy csma_study(const CsmaParams& params, std::size_t n, std::size_t slots, std::size_t burn_in,
                     std::uint64_t seed) {
  if (burn_in >= slots) fail(ErrorCode::InvalidArgument, "burn-in must be shorter than the run");
  const ScenarioModel s = csma_scenario(params, n, false, slots);
  SimConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.init = InitMode::ExactProportions;
  const EmpiricalTrajectory traj = simulate_nplayer(s, cfg);
  const auto& profiles = traj.replications.front().profiles;

  CsmaStudy out;
  out.slots = slots;
  out.burn_in = burn_in;
  out.simulated = Population(s.space.type_count(), s.space.state_count());
  for (std::size_t t = burn_in + 1; t <= slots; ++t) {
    auto acc = out.simulated.flat();
    const auto cur = profiles[t].flat();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += cur[i];
  }
  for (double& v : out.simulated.flat()) v /= static_cast<double>(slots - burn_in);
  out.mean_field = csma_mean_field_fixed_point(params, n);
  out.l1 = l1_distance(out.simulated, out.mean_field);
  return out;
}

}  // namespace mfg::nplayer
