#include "mfg/nplayer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "mfg/bsk.hpp"
#include "mfg/errors.hpp"
#include "mfg/hjb.hpp"

namespace mfg::nplayer {

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> shares) {
  std::vector<std::size_t> out(shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = static_cast<double>(total) * std::max(0.0, shares[i]);
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  // Largest remainder first, lower index on ties.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total && j < remainders.size(); ++j, ++assigned)
    ++out[remainders[j].second];
  return out;
}

std::vector<Population> EmpiricalTrajectory::mean() const {
  if (replications.empty()) return {};
  std::vector<Population> acc = replications.front().profiles;
  for (std::size_t r = 1; r < replications.size(); ++r)
    for (std::size_t k = 0; k < acc.size(); ++k) {
      auto a = acc[k].flat();
      const auto b = replications[r].profiles[k].flat();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
  const double scale = 1.0 / static_cast<double>(replications.size());
  for (auto& p : acc)
    for (double& v : p.flat()) v *= scale;
  return acc;
}

const StagePolicy& stage_policy(const SimConfig& cfg, const StagePolicy& fallback, std::size_t stage) {
  if (!cfg.policy.stages.empty()) return cfg.policy[std::min(stage, cfg.policy.size() - 1)];
  if (cfg.stationary_policy) return *cfg.stationary_policy;
  return fallback;
}

namespace {

struct Players {
  std::vector<std::size_t> type;
  std::vector<std::size_t> state;
  std::vector<std::uint64_t> stream;
  std::vector<std::size_t> type_counts;
};

Players layout(const ScenarioModel& scenario, const SimConfig& cfg) {
  const auto& space = scenario.space;
  Players p;
  if (!cfg.players.empty()) {
    p.type_counts.assign(space.type_count(), 0);
    for (const auto& spec : cfg.players) {
      if (spec.type >= space.type_count() || spec.state >= space.state_count()) {
        fail(ErrorCode::ShapeMismatch, "explicit player outside the state space");
      }
      p.type.push_back(spec.type);
      p.state.push_back(spec.state);
      p.stream.push_back(spec.stream);
      ++p.type_counts[spec.type];
    }
  } else {
    if (cfg.n == 0) fail(ErrorCode::InvalidArgument, "n must be >= 1");
    p.type_counts = apportion(cfg.n, scenario.type_shares);
    for (std::size_t k = 0; k < space.type_count(); ++k)
      for (std::size_t j = 0; j < p.type_counts[k]; ++j) {
        p.type.push_back(k);
        p.stream.push_back(p.stream.size());
      }
    p.state.assign(cfg.n, 0);
  }
  for (std::size_t k = 0; k < space.type_count(); ++k)
    if (p.type_counts[k] == 0) {
      fail(ErrorCode::InvalidArgument, "type '" + space.types[k] + "' has no players; increase n");
    }
  return p;
}

std::size_t sample_index(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding: fall back to the last positive entry.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

class Run {
 public:
  Run(const ScenarioModel& scenario, const SimConfig& cfg, const Players& players, std::size_t rep)
      : scenario_(scenario),
        cfg_(cfg),
        types_(players.type),
        states_(players.state),
        counts_(players.type_counts),
        fallback_(StagePolicy::pure(scenario.space, 0)),
        profile_(scenario.space.type_count(), scenario.space.state_count()),
        tally_(scenario.space.type_count(), scenario.space.state_count()) {
    streams_.reserve(types_.size());
    for (std::uint64_t s : players.stream) streams_.push_back(make_stream(cfg.seed, rep, s));
    if (cfg.players.empty()) place();
    for (std::size_t j = 0; j < types_.size(); ++j) tally_(types_[j], states_[j]) += 1.0;
    refresh();
  }

  Replication discrete(const std::vector<double>& times) {
    Replication out;
    begin(out, times.size());
    record(out);
    const std::size_t n_states = scenario_.space.state_count();
    const std::size_t n_types = scenario_.space.type_count();
    Matrix rows(n_types * n_states, n_states);
    std::vector<double> row(n_states);
    for (std::size_t t = 0; t + 1 < times.size(); ++t) {
      const StagePolicy& u = stage_policy(cfg_, fallback_, t);
      rows.fill(0.0);
      for (std::size_t k = 0; k < n_types; ++k)
        for (std::size_t x = 0; x < n_states; ++x) {
          if (tally_(k, x) == 0.0) continue;
          auto target = rows.row(k * n_states + x);
          const auto probs = u.at(k, x);
          for (std::size_t a = 0; a < probs.size(); ++a) {
            if (probs[a] == 0.0) continue;
            std::fill(row.begin(), row.end(), 0.0);
            scenario_.kernel.row(static_cast<double>(t), k, x, a, profile_, row);
            for (std::size_t y = 0; y < n_states; ++y) target[y] += probs[a] * row[y];
          }
          double total = 0.0;
          for (double v : target) {
            if (!(v >= -kClampTolerance)) probe_failure(t, x, "negative transition probability");
            total += v;
          }
          if (std::abs(total - 1.0) > kSimplexTolerance) probe_failure(t, x, "row sum " + std::to_string(total));
        }
      for (std::size_t j = 0; j < types_.size(); ++j) {
        const double draw = std::generate_canonical<double, 64>(streams_[j]);
        states_[j] = sample_index(rows.row(types_[j] * n_states + states_[j]), draw);
      }
      out.events += types_.size();
      std::fill(tally_.flat().begin(), tally_.flat().end(), 0.0);
      for (std::size_t j = 0; j < types_.size(); ++j) tally_(types_[j], states_[j]) += 1.0;
      refresh();
      record(out);
    }
    return out;
  }

  Replication continuous(const std::vector<double>& grid, const std::vector<double>& record_times) {
    Replication out;
    begin(out, record_times.size());
    const double rate = scenario_.clock_rate;
    const double horizon = grid.back();
    const double dt = scenario_.horizon.dt;
    std::exponential_distribution<double> clock(rate);
    using Event = std::pair<double, std::size_t>;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
    for (std::size_t j = 0; j < types_.size(); ++j) queue.emplace(clock(streams_[j]), j);

    const std::size_t n_states = scenario_.space.state_count();
    std::vector<double> row(n_states);
    std::vector<double> rates(n_states);
    std::size_t next_record = 0;
    while (!queue.empty()) {
      const auto [tau, j] = queue.top();
      while (next_record < record_times.size() && record_times[next_record] < tau) {
        record(out);
        ++next_record;
      }
      if (tau > horizon) break;
      queue.pop();
      ++out.events;

      const std::size_t k = types_[j];
      const std::size_t x = states_[j];
      const auto stage = std::min(static_cast<std::size_t>(tau / dt), grid.size() - 2);
      const auto probs = stage_policy(cfg_, fallback_, stage).at(k, x);
      std::fill(rates.begin(), rates.end(), 0.0);
      for (std::size_t a = 0; a < probs.size(); ++a) {
        if (probs[a] == 0.0) continue;
        std::fill(row.begin(), row.end(), 0.0);
        scenario_.kernel.row(tau, k, x, a, profile_, row);
        for (std::size_t y = 0; y < n_states; ++y) rates[y] += probs[a] * row[y];
      }
      double out_rate = 0.0;
      for (std::size_t y = 0; y < n_states; ++y) {
        if (y == x) continue;
        if (!(rates[y] >= -kClampTolerance)) probe_failure(tau, x, "negative switching rate");
        rates[y] = std::max(rates[y], 0.0);
        out_rate += rates[y];
      }
      if (out_rate > rate * (1.0 + 1e-9)) {
        probe_failure(tau, x, "total switching rate " + std::to_string(out_rate) +
                                  " exceeds clock_rate " + std::to_string(rate));
      }
      const double draw = std::generate_canonical<double, 64>(streams_[j]) * rate;
      double acc = 0.0;
      for (std::size_t y = 0; y < n_states; ++y) {
        if (y == x) continue;
        acc += rates[y];
        if (draw < acc) {
          tally_(k, x) -= 1.0;
          tally_(k, y) += 1.0;
          states_[j] = y;
          profile_(k, x) = tally_(k, x) / static_cast<double>(counts_[k]);
          profile_(k, y) = tally_(k, y) / static_cast<double>(counts_[k]);
          break;
        }
      }
      queue.emplace(tau + clock(streams_[j]), j);
    }
    while (next_record < record_times.size()) {
      record(out);
      ++next_record;
    }
    return out;
  }

 private:
  void place() {
    const std::size_t n_types = scenario_.space.type_count();
    if (cfg_.init == InitMode::Iid) {
      for (std::size_t j = 0; j < types_.size(); ++j) {
        const double draw = std::generate_canonical<double, 64>(streams_[j]);
        states_[j] = sample_index(scenario_.m0.row(types_[j]), draw);
      }
      return;
    }
    for (std::size_t k = 0; k < n_types; ++k) {
      const auto per_state = apportion(counts_[k], scenario_.m0.row(k));
      std::size_t x = 0;
      std::size_t used = 0;
      for (std::size_t j = 0; j < types_.size(); ++j) {
        if (types_[j] != k) continue;
        while (used == per_state[x]) {
          ++x;
          used = 0;
        }
        states_[j] = x;
        ++used;
      }
    }
  }

  void refresh() {
    for (std::size_t k = 0; k < tally_.types(); ++k)
      for (std::size_t x = 0; x < tally_.states(); ++x)
        profile_(k, x) = tally_(k, x) / static_cast<double>(counts_[k]);
  }

  void begin(Replication& out, std::size_t points) {
    out.profiles.reserve(points);
    const std::size_t k = std::min(cfg_.tagged, types_.size());
    out.tagged.assign(k, {});
    for (auto& path : out.tagged) path.reserve(points);
  }

  void record(Replication& out) {
    out.profiles.push_back(profile_);
    for (std::size_t j = 0; j < out.tagged.size(); ++j)
      out.tagged[j].push_back(static_cast<std::uint32_t>(states_[j]));
  }

  [[noreturn]] void probe_failure(double t, std::size_t x, const std::string& what) {
    fail(ErrorCode::KernelProbeFailure, "kernel invalid at t=" + std::to_string(t) + ", state '" +
                                            scenario_.space.states[x] + "': " + what);
  }

  const ScenarioModel& scenario_;
  const SimConfig& cfg_;
  std::vector<std::size_t> types_;
  std::vector<std::size_t> states_;
  std::vector<std::size_t> counts_;
  StagePolicy fallback_;
  std::vector<Engine> streams_;
  Population profile_;
  StateTable tally_;
};

std::vector<double> record_grid(const ScenarioModel& scenario, const SimConfig& cfg,
                                const std::vector<double>& grid) {
  if (scenario.horizon.mode == KernelMode::DiscreteProbability) return grid;
  const std::size_t stride = std::max<std::size_t>(1, cfg.record_stride);
  std::vector<double> out;
  for (std::size_t k = 0; k < grid.size(); k += stride) out.push_back(grid[k]);
  if (out.back() != grid.back()) out.push_back(grid.back());
  return out;
}

}  // namespace

EmpiricalTrajectory simulate_nplayer(const ScenarioModel& scenario, const SimConfig& cfg) {
  if (cfg.replications == 0) fail(ErrorCode::InvalidArgument, "replications must be >= 1");
  if (!cfg.policy.stages.empty()) {
    for (const auto& u : cfg.policy.stages) check_policy(scenario.space, u);
    if (cfg.policy.size() < scenario.horizon.steps()) {
      fail(ErrorCode::GridMismatch, "policy does not span the horizon");
    }
  }
  if (cfg.stationary_policy) check_policy(scenario.space, *cfg.stationary_policy);
  const Players players = layout(scenario, cfg);
  const auto grid = scenario.horizon.mode == KernelMode::DiscreteProbability
                        ? scenario.horizon.grid()
                        : hjb::time_grid(scenario.horizon.T, scenario.horizon.dt);

  EmpiricalTrajectory out;
  out.times = record_grid(scenario, cfg, grid);
  out.type_counts = players.type_counts;
  out.replications.resize(cfg.replications);
  parallel_for(cfg.replications, resolve_threads(cfg.threads), [&](std::size_t r) {
    Run run(scenario, cfg, players, r);
    out.replications[r] = scenario.horizon.mode == KernelMode::DiscreteProbability
                              ? run.discrete(out.times)
                              : run.continuous(grid, out.times);
  });
  return out;
}

MeanFieldTrajectory mean_field_reference(const ScenarioModel& scenario, const SimConfig& cfg) {
  const StagePolicy fallback = StagePolicy::pure(scenario.space, 0);
  const std::size_t steps = scenario.horizon.steps();
  PolicyTrajectory u;
  u.stages.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) u.stages.push_back(stage_policy(cfg, fallback, s));
  if (scenario.horizon.mode == KernelMode::DiscreteProbability) {
    return bsk::forward_kolmogorov(scenario, u, scenario.m0);
  }
  return hjb::forward_kfe(scenario, u, scenario.m0, scenario.horizon.dt);
}

double l1_trajectory_distance(const std::vector<double>& times, const std::vector<Population>& mn,
                              const MeanFieldTrajectory& m) {
  if (times.size() != mn.size() || times.empty() || m.size() == 0) {
    fail(ErrorCode::GridMismatch, "empty or inconsistent empirical trajectory");
  }
  const double slack = 1e-9 * std::max(1.0, std::abs(m.times.back()));
  if (times.front() > m.times.front() + slack || times.back() < m.times.back() - slack) {
    fail(ErrorCode::GridMismatch, "empirical trajectory does not cover the mean-field grid");
  }
  double worst = 0.0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    while (j + 1 < times.size() && times[j + 1] <= m.times[k] + slack) ++j;
    if (mn[j].types() != m[k].types() || mn[j].states() != m[k].states()) {
      fail(ErrorCode::GridMismatch, "profile shapes differ");
    }
    worst = std::max(worst, l1_distance(mn[j], m[k]));
  }
  return worst;
}

}  // namespace mfg::nplayer
