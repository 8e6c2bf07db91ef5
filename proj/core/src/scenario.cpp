#include "mfg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "mfg/errors.hpp"

namespace mfg {

std::size_t StateSpace::max_actions() const {
  std::size_t best = 0;
  for (const auto& per_type : actions)
    for (const auto& labels : per_type) best = std::max(best, labels.size());
  return best;
}

StateSpace StateSpace::uniform(std::vector<std::string> states, std::vector<std::string> actions,
                               std::vector<std::string> types) {
  StateSpace s;
  s.states = std::move(states);
  s.types = std::move(types);
  s.actions.assign(s.types.size(), std::vector<std::vector<std::string>>(s.states.size(), actions));
  return s;
}

std::string_view to_string(KernelMode mode) noexcept {
  return mode == KernelMode::DiscreteProbability ? "discrete" : "continuous";
}

StagePolicy::StagePolicy(const StateSpace& space) {
  probs_.resize(space.type_count());
  for (std::size_t k = 0; k < space.type_count(); ++k) {
    probs_[k].resize(space.state_count());
    for (std::size_t x = 0; x < space.state_count(); ++x)
      probs_[k][x].assign(space.action_count(k, x), 0.0);
  }
}

StagePolicy StagePolicy::pure(const StateSpace& space, std::size_t action) {
  StagePolicy p(space);
  for (std::size_t k = 0; k < space.type_count(); ++k)
    for (std::size_t x = 0; x < space.state_count(); ++x) {
      auto probs = p.at(k, x);
      probs[std::min(action, probs.size() - 1)] = 1.0;
    }
  return p;
}

StagePolicy StagePolicy::uniform(const StateSpace& space) {
  StagePolicy p(space);
  for (std::size_t k = 0; k < space.type_count(); ++k)
    for (std::size_t x = 0; x < space.state_count(); ++x) {
      auto probs = p.at(k, x);
      std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(probs.size()));
    }
  return p;
}

void check_policy(const StateSpace& space, const StagePolicy& policy) {
  if (policy.type_count() != space.type_count() || policy.state_count() != space.state_count()) {
    fail(ErrorCode::ShapeMismatch, "policy shape does not match the state space");
  }
  for (std::size_t k = 0; k < space.type_count(); ++k)
    for (std::size_t x = 0; x < space.state_count(); ++x) {
      const auto probs = policy.at(k, x);
      if (probs.size() != space.action_count(k, x)) {
        fail(ErrorCode::ShapeMismatch, "policy action count mismatch at state '" +
                                           space.states[x] + "'");
      }
      if (!is_on_simplex(probs, 1e-12)) {
        fail(ErrorCode::InvalidDistribution,
             "policy at state '" + space.states[x] + "' is not a probability vector");
      }
    }
}

MeanFieldTrajectory MeanFieldTrajectory::constant(const Population& m,
                                                  const std::vector<double>& times) {
  MeanFieldTrajectory traj;
  traj.times = times;
  traj.points.assign(times.size(), m);
  return traj;
}

double sup_l1_distance(const MeanFieldTrajectory& a, const MeanFieldTrajectory& b) {
  if (a.size() != b.size()) fail(ErrorCode::GridMismatch, "trajectory lengths differ");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, l1_distance(a[k], b[k]));
  return worst;
}

std::size_t Horizon::steps() const {
  if (mode == KernelMode::DiscreteProbability) return stages;
  return static_cast<std::size_t>(std::llround(T / dt));
}

std::vector<double> Horizon::grid() const {
  const std::size_t n = steps();
  std::vector<double> g(n + 1);
  const double step = mode == KernelMode::DiscreteProbability ? 1.0 : dt;
  for (std::size_t k = 0; k <= n; ++k) g[k] = static_cast<double>(k) * step;
  return g;
}

namespace {

void check_space(const StateSpace& space) {
  if (space.states.empty()) fail(ErrorCode::ShapeMismatch, "state space is empty");
  if (space.types.empty()) fail(ErrorCode::ShapeMismatch, "type set is empty");
  auto unique = [](const std::vector<std::string>& labels, const char* what) {
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) {
      fail(ErrorCode::ShapeMismatch, std::string("duplicate ") + what + " label");
    }
  };
  unique(space.states, "state");
  unique(space.types, "type");
  if (space.actions.size() != space.types.size()) {
    fail(ErrorCode::ShapeMismatch, "action table must have one entry per type");
  }
  for (std::size_t k = 0; k < space.type_count(); ++k) {
    if (space.actions[k].size() != space.state_count()) {
      fail(ErrorCode::ShapeMismatch, "action table for type '" + space.types[k] +
                                         "' must have one entry per state");
    }
    for (std::size_t x = 0; x < space.state_count(); ++x) {
      if (space.actions[k][x].empty()) {
        fail(ErrorCode::EmptyActionSet, "no actions for type '" + space.types[k] + "' in state '" +
                                            space.states[x] + "'");
      }
      unique(space.actions[k][x], "action");
    }
  }
}

}  // namespace

void check_kernel_at(const ScenarioModel& scenario, double t, const Population& m) {
  const auto& space = scenario.space;
  const std::size_t n = space.state_count();
  std::vector<double> row(n);
  for (std::size_t k = 0; k < space.type_count(); ++k)
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t a = 0; a < space.action_count(k, x); ++a) {
        std::fill(row.begin(), row.end(), 0.0);
        scenario.kernel.row(t, k, x, a, m, row);
        auto where = [&] {
          std::ostringstream os;
          os.precision(17);
          os << "type '" << space.types[k] << "', state '" << space.states[x] << "', action '"
             << space.actions[k][x][a] << "', t=" << t;
          return os.str();
        };
        double total = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
          if (!std::isfinite(row[y])) fail(ErrorCode::NonFiniteValue, "kernel entry at " + where());
          total += row[y];
        }
        if (scenario.kernel.mode == KernelMode::DiscreteProbability) {
          for (double v : row)
            if (v < -kClampTolerance)
              fail(ErrorCode::KernelNotStochastic, "negative probability at " + where());
          if (std::abs(total - 1.0) > kSimplexTolerance) {
            fail(ErrorCode::KernelNotStochastic,
                 "row sums to " + std::to_string(total) + " at " + where());
          }
        } else {
          for (std::size_t y = 0; y < n; ++y)
            if (y != x && row[y] < -kClampTolerance)
              fail(ErrorCode::NegativeRate, "negative off-diagonal rate at " + where());
          if (std::abs(total) > kSimplexTolerance) {
            fail(ErrorCode::GeneratorRowSum,
                 "generator row sums to " + std::to_string(total) + " at " + where());
          }
        }
      }
}

ScenarioModel validate_scenario(ScenarioModel candidate, std::uint64_t probe_seed) {
  const auto& space = candidate.space;
  check_space(space);
  if (!candidate.kernel.row) fail(ErrorCode::ShapeMismatch, "scenario has no transition kernel");
  if (!candidate.payoff.running || !candidate.payoff.terminal) {
    fail(ErrorCode::ShapeMismatch, "scenario payoff is incomplete");
  }
  if (candidate.kernel.mode != candidate.horizon.mode) {
    fail(ErrorCode::ModeMismatch, "kernel mode '" + std::string(to_string(candidate.kernel.mode)) +
                                      "' does not match horizon mode '" +
                                      std::string(to_string(candidate.horizon.mode)) + "'");
  }
  const auto& h = candidate.horizon;
  if (h.mode == KernelMode::DiscreteProbability) {
    if (h.stages == 0) fail(ErrorCode::InvalidArgument, "horizon must have at least one stage");
  } else {
    if (!(h.T > 0.0) || !(h.dt > 0.0) || h.dt > h.T) {
      fail(ErrorCode::InvalidArgument, "continuous horizon needs T > 0 and 0 < dt <= T");
    }
    const double ratio = h.T / h.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio) {
      fail(ErrorCode::InvalidArgument, "T must be an integer multiple of dt");
    }
  }
  if (candidate.m0.types() != space.type_count() || candidate.m0.states() != space.state_count()) {
    fail(ErrorCode::ShapeMismatch, "m0 must have one distribution per type over all states");
  }
  for (std::size_t k = 0; k < space.type_count(); ++k) check_simplex(candidate.m0.row(k));
  if (candidate.type_shares.empty()) {
    candidate.type_shares.assign(space.type_count(), 1.0 / static_cast<double>(space.type_count()));
  }
  if (candidate.type_shares.size() != space.type_count()) {
    fail(ErrorCode::ShapeMismatch, "type_shares must have one entry per type");
  }
  check_simplex(candidate.type_shares);
  if (!(candidate.clock_rate > 0.0)) fail(ErrorCode::InvalidArgument, "clock_rate must be > 0");

  const double t_end = h.mode == KernelMode::DiscreteProbability ? static_cast<double>(h.stages) : h.T;
  std::mt19937_64 rng(probe_seed);
  std::vector<Population> probes{candidate.m0};
  for (std::size_t i = 0; i < kProbeCount; ++i)
    probes.push_back(random_profile(space.type_count(), space.state_count(), rng));

  for (std::size_t i = 0; i < probes.size(); ++i) {
    double t = t_end * static_cast<double>(i) / static_cast<double>(probes.size());
    if (h.mode == KernelMode::DiscreteProbability) t = std::floor(t);
    const Population& m = probes[i];
    check_kernel_at(candidate, t, m);
    for (std::size_t k = 0; k < space.type_count(); ++k)
      for (std::size_t x = 0; x < space.state_count(); ++x) {
        if (!std::isfinite(candidate.payoff.terminal(k, x, m))) {
          fail(ErrorCode::NonFiniteValue, "terminal payoff at state '" + space.states[x] + "'");
        }
        for (std::size_t a = 0; a < space.action_count(k, x); ++a)
          if (!std::isfinite(candidate.payoff.running(t, k, x, a, m))) {
            fail(ErrorCode::NonFiniteValue, "running payoff at state '" + space.states[x] + "'");
          }
      }
    if (candidate.explicit_drift && h.mode == KernelMode::ContinuousRate) {
      for (const StagePolicy& u : {StagePolicy::pure(space, 0), StagePolicy::uniform(space)}) {
        StateTable given(space.type_count(), space.state_count());
        (*candidate.explicit_drift)(t, u, m, given);
        const StateTable induced = generator_drift(candidate, u, m, t);
        for (std::size_t k = 0; k < space.type_count(); ++k) {
          if (std::abs(sum(given.row(k))) > 1e-9) {
            fail(ErrorCode::DriftGeneratorMismatch, "explicit drift is not mass conserving");
          }
        }
        if (l1_distance(given.flat(), induced.flat()) > 1e-8) {
          fail(ErrorCode::DriftGeneratorMismatch,
               "explicit drift disagrees with the generator-induced drift");
        }
      }
    }
  }
  return candidate;
}

RunningTable reduce_pairwise_payoff(const PairwisePayoff& payoff, const Population& m) {
  const auto flat = m.flat();
  RunningTable r(payoff.pairwise.size());
  for (std::size_t k = 0; k < payoff.pairwise.size(); ++k) {
    r[k].resize(payoff.pairwise[k].size());
    for (std::size_t x = 0; x < payoff.pairwise[k].size(); ++x) {
      r[k][x].resize(payoff.pairwise[k][x].size());
      for (std::size_t a = 0; a < payoff.pairwise[k][x].size(); ++a) {
        const auto& weights = payoff.pairwise[k][x][a];
        if (weights.size() != flat.size()) {
          fail(ErrorCode::ShapeMismatch, "pairwise payoff has " + std::to_string(weights.size()) +
                                             " opponent entries, profile has " +
                                             std::to_string(flat.size()));
        }
        double acc = payoff.base.empty() ? 0.0 : payoff.base.at(k).at(x).at(a);
        for (std::size_t w = 0; w < flat.size(); ++w) acc += weights[w] * flat[w];
        r[k][x][a] = acc;
      }
    }
  }
  return r;
}

RunningPayoffFn make_pairwise_running(PairwisePayoff payoff) {
  return [p = std::move(payoff)](double, std::size_t type, std::size_t state, std::size_t action,
                                 const Population& m) {
    const auto& weights = p.pairwise.at(type).at(state).at(action);
    const auto flat = m.flat();
    if (weights.size() != flat.size()) fail(ErrorCode::ShapeMismatch, "pairwise payoff shape");
    double acc = p.base.empty() ? 0.0 : p.base[type][state][action];
    for (std::size_t w = 0; w < flat.size(); ++w) acc += weights[w] * flat[w];
    return acc;
  };
}

Matrix policy_averaged_kernel(const ScenarioModel& scenario, const StagePolicy& u,
                              const Population& m, double t, std::size_t type,
                              KernelMode expected) {
  if (scenario.kernel.mode != expected) {
    fail(ErrorCode::ModeMismatch, "kernel is " + std::string(to_string(scenario.kernel.mode)) +
                                      ", solver expects " + std::string(to_string(expected)));
  }
  const std::size_t n = scenario.space.state_count();
  Matrix L(n, n);
  std::vector<double> row(n);
  for (std::size_t x = 0; x < n; ++x) {
    const auto probs = u.at(type, x);
    for (std::size_t a = 0; a < probs.size(); ++a) {
      if (probs[a] == 0.0) continue;
      std::fill(row.begin(), row.end(), 0.0);
      scenario.kernel.row(t, type, x, a, m, row);
      for (std::size_t y = 0; y < n; ++y) L(x, y) += probs[a] * row[y];
    }
  }
  return L;
}

StateTable generator_drift(const ScenarioModel& scenario, const StagePolicy& u,
                           const Population& m, double t) {
  const std::size_t n = scenario.space.state_count();
  StateTable drift(scenario.space.type_count(), n);
  for (std::size_t k = 0; k < scenario.space.type_count(); ++k) {
    const Matrix L = policy_averaged_kernel(scenario, u, m, t, k, KernelMode::ContinuousRate);
    for (std::size_t x = 0; x < n; ++x) {
      const double mx = m(k, x);
      if (mx == 0.0) continue;
      for (std::size_t y = 0; y < n; ++y) drift(k, y) += mx * L(x, y);
    }
  }
  return drift;
}

std::function<void(std::span<const double>, std::span<double>)> state_payoff(
    const ScenarioModel& scenario) {
  return [scenario](std::span<const double> m, std::span<double> r) {
    const std::size_t n = scenario.space.state_count();
    Population profile = scenario.m0;
    std::copy(m.begin(), m.end(), profile.row(0).begin());
    for (std::size_t x = 0; x < n; ++x) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < scenario.space.action_count(0, x); ++a)
        best = std::max(best, scenario.payoff.running(0.0, 0, x, a, profile));
      r[x] = best;
    }
  };
}

}  // namespace mfg
