#include <algorithm>
#include <cmath>
#include <limits>

#include "mfg/dynamics.hpp"
#include "mfg/errors.hpp"
#include "mfg/nplayer.hpp"

namespace mfg::nplayer {

namespace {

void check_ns(const std::vector<std::size_t>& ns) {
  if (ns.size() < 3) fail(ErrorCode::InvalidArgument, "a rate study needs at least three values of n");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] == 0) fail(ErrorCode::InvalidArgument, "n must be >= 1");
    if (i > 0 && ns[i] <= ns[i - 1]) fail(ErrorCode::InvalidArgument, "ns must be strictly increasing");
  }
}

void check_replications(std::size_t reps) {
  if (reps < kMinReplications) {
    fail(ErrorCode::InsufficientReplications,
         std::to_string(reps) + " replications; rate studies need at least " +
             std::to_string(kMinReplications));
  }
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double average(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

// The reference restricted to the record times, so the sup compares simultaneous profiles.
MeanFieldTrajectory at_times(const MeanFieldTrajectory& m, const std::vector<double>& times) {
  MeanFieldTrajectory out;
  for (double t : times) {
    auto it = std::lower_bound(m.times.begin(), m.times.end(), t);
    if (it == m.times.end() || (it != m.times.begin() && t - *(it - 1) < *it - t)) --it;
    const auto k = static_cast<std::size_t>(it - m.times.begin());
    out.times.push_back(m.times[k]);
    out.points.push_back(m.points[k]);
  }
  return out;
}

}  // namespace

ConvergenceReport convergence_study(const ScenarioModel& scenario, const std::vector<std::size_t>& ns,
                                    const SimConfig& cfg) {
  check_ns(ns);
  check_replications(cfg.replications);
  const MeanFieldTrajectory m = mean_field_reference(scenario, cfg);
  ConvergenceReport report;
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t n : ns) {
    SimConfig run = cfg;
    run.n = n;
    run.players.clear();
    const EmpiricalTrajectory traj = simulate_nplayer(scenario, run);
    const MeanFieldTrajectory reference = at_times(m, traj.times);
    std::vector<double> distances(traj.replications.size());
    for (std::size_t r = 0; r < distances.size(); ++r)
      distances[r] = l1_trajectory_distance(traj.times, traj.replications[r].profiles, reference);
    report.points.push_back({n, estimate_mean(distances)});
    xs.push_back(static_cast<double>(n));
    ys.push_back(report.points.back().distance.mean);
  }
  report.fit = fit_loglog(xs, ys);
  return report;
}

ChaosPoint chaos_test(const EmpiricalTrajectory& traj, const std::vector<std::vector<double>>& phis,
                      std::size_t time_index) {
  if (phis.size() < 2) fail(ErrorCode::InvalidArgument, "chaos test needs k >= 2 test functions");
  if (traj.replications.size() < 2) fail(ErrorCode::InvalidArgument, "chaos test needs >= 2 replications");
  if (time_index >= traj.times.size()) fail(ErrorCode::GridMismatch, "time index beyond the record grid");
  std::size_t total = 0;
  for (std::size_t c : traj.type_counts) total += c;
  if (total < 2) fail(ErrorCode::InvalidArgument, "chaos test needs at least two players");
  const std::size_t states = traj.replications.front().profiles.front().states();
  for (const auto& phi : phis)
    if (phi.size() != states) fail(ErrorCode::ShapeMismatch, "test function must have one value per state");

  const std::size_t R = traj.replications.size();
  const double N = static_cast<double>(total);
  ChaosPoint out;
  out.n = total;

  // Exchangeable estimator over all ordered pairs of distinct players.
  std::vector<double> pair(R), first(R), second(R);
  for (std::size_t r = 0; r < R; ++r) {
    const Population& m = traj.replications[r].profiles[time_index];
    double s1 = 0.0, s2 = 0.0, s12 = 0.0;
    for (std::size_t k = 0; k < m.types(); ++k) {
      const double nk = static_cast<double>(traj.type_counts[k]);
      for (std::size_t x = 0; x < states; ++x) {
        const double count = nk * m(k, x);
        s1 += count * phis[0][x];
        s2 += count * phis[1][x];
        s12 += count * phis[0][x] * phis[1][x];
      }
    }
    pair[r] = (s1 * s2 - s12) / (N * (N - 1.0));
    first[r] = s1 / N;
    second[r] = s2 / N;
  }
  const double mean_a = average(first);
  const double mean_b = average(second);
  double sum_ab = 0.0;
  for (std::size_t r = 0; r < R; ++r) sum_ab += first[r] * second[r];
  const double Rd = static_cast<double>(R);
  // Unbiased estimate of E[A] E[B] from independent replications.
  const double product = (mean_a * Rd * mean_b * Rd - sum_ab) / (Rd * (Rd - 1.0));
  out.covariance = average(pair) - product;
  out.gap = std::abs(out.covariance);
  std::vector<double> influence(R);
  for (std::size_t r = 0; r < R; ++r) influence[r] = pair[r] - mean_b * first[r] - mean_a * second[r];
  out.std_error = sample_sd(influence) / std::sqrt(Rd);

  // Tagged players: E Π φ_j(x_j) - Π E φ_j(x_j).
  const std::size_t k = phis.size();
  if (traj.replications.front().tagged.size() >= k) {
    std::vector<double> joint(R);
    std::vector<std::vector<double>> marginals(k, std::vector<double>(R));
    for (std::size_t r = 0; r < R; ++r) {
      double prod = 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double v = phis[j][traj.replications[r].tagged[j][time_index]];
        marginals[j][r] = v;
        prod *= v;
      }
      joint[r] = prod;
    }
    std::vector<double> means(k);
    double prod_means = 1.0;
    for (std::size_t j = 0; j < k; ++j) prod_means *= (means[j] = average(marginals[j]));
    out.tagged_gap = std::abs(average(joint) - prod_means);
    for (std::size_t r = 0; r < R; ++r) {
      double psi = joint[r];
      for (std::size_t j = 0; j < k; ++j) {
        double others = 1.0;
        for (std::size_t l = 0; l < k; ++l)
          if (l != j) others *= means[l];
        psi -= others * marginals[j][r];
      }
      influence[r] = psi;
    }
    out.tagged_std_error = sample_sd(influence) / std::sqrt(Rd);
  } else {
    out.tagged_gap = std::numeric_limits<double>::quiet_NaN();
    out.tagged_std_error = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

ChaosReport chaos_study(const ScenarioModel& scenario, const std::vector<std::size_t>& ns,
                        const SimConfig& cfg, const std::vector<std::vector<double>>& phis) {
  check_ns(ns);
  check_replications(cfg.replications);
  ChaosReport report;
  std::vector<double> xs, ys;
  for (std::size_t n : ns) {
    SimConfig run = cfg;
    run.n = n;
    run.players.clear();
    run.tagged = std::max(cfg.tagged, phis.size());
    const EmpiricalTrajectory traj = simulate_nplayer(scenario, run);
    report.points.push_back(chaos_test(traj, phis, traj.times.size() - 1));
    xs.push_back(static_cast<double>(n));
    ys.push_back(std::max(report.points.back().gap, std::numeric_limits<double>::min()));
  }
  report.fit = fit_loglog(xs, ys);
  return report;
}

DoubleLimitReport double_limit_experiment(const ScenarioModel& scenario, std::size_t n,
                                          double t_long, std::uint64_t seed, std::size_t threads) {
  if (!scenario.revision) {
    fail(ErrorCode::InvalidArgument, "double-limit experiment needs a revision-protocol scenario");
  }
  if (scenario.space.type_count() != 1) fail(ErrorCode::ShapeMismatch, "double-limit needs one type");
  if (!(t_long > 0.0)) fail(ErrorCode::InvalidArgument, "T_long must be > 0");
  ScenarioModel base = scenario;
  base.horizon.T = t_long;
  const RevisionSpec chain_spec = *scenario.revision;
  RevisionSpec flow_spec = chain_spec;
  flow_spec.mutation = 0.0;
  const ScenarioModel chain = dynamics::revision_scenario(base, chain_spec);

  DoubleLimitReport out;
  out.window_start = 0.5 * t_long;
  out.window_end = t_long;

  const auto protocol = dynamics::parse_protocol(flow_spec.protocol);
  const auto flow = dynamics::scenario_protocol_kernel(base, protocol, flow_spec.temperature);
  const std::size_t S = scenario.space.state_count();
  const SimplexVector start(std::vector<double>(scenario.m0.row(0).begin(), scenario.m0.row(0).end()));
  const std::vector<SimplexVector> seeds{SimplexVector::uniform(S), start};
  const auto rest = dynamics::find_rest_points(flow, seeds, 1e-10);
  for (const auto& p : rest.points) {
    const auto v = p.values();
    if (*std::min_element(v.begin(), v.end()) > 1e-3) {
      out.rest_point = v;
      break;
    }
  }
  if (out.rest_point.empty()) fail(ErrorCode::InvalidArgument, "mean-field flow has no interior rest point");

  dynamics::IntegratorConfig icfg;
  icfg.step = scenario.horizon.dt;
  icfg.horizon = t_long;
  const MeanFieldTrajectory mf = dynamics::integrate_forward(flow, start, icfg);
  out.mf_min_distance = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < mf.size(); ++k)
    if (mf.times[k] >= out.window_start - 1e-12)
      out.mf_min_distance = std::min(out.mf_min_distance, l1_distance(mf[k].row(0), out.rest_point));

  SimConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.init = InitMode::ExactProportions;
  cfg.threads = threads;
  cfg.record_stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.01 / scenario.horizon.dt)));
  const EmpiricalTrajectory traj = simulate_nplayer(chain, cfg);
  out.ergodic_average.assign(S, 0.0);
  std::size_t samples = 0;
  const auto& profiles = traj.replications.front().profiles;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    if (traj.times[k] < out.window_start - 1e-12) continue;
    for (std::size_t x = 0; x < S; ++x) out.ergodic_average[x] += profiles[k](0, x);
    ++samples;
  }
  for (double& v : out.ergodic_average) v /= static_cast<double>(samples);
  out.ergodic_distance = l1_distance(out.ergodic_average, out.rest_point);
  return out;
}

}  // namespace mfg::nplayer
