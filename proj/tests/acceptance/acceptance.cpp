// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
// the measured quantities; `--only ID` runs a single criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "builders.hpp"
#include "mfg/bsk.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/errors.hpp"
#include "mfg/hjb.hpp"
#include "mfg/mkv.hpp"
#include "mfg/nplayer.hpp"
#include "mfg/scenario_io.hpp"
#include "oracles.hpp"

using namespace mfg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  double time_limit = 0.0;
  std::function<Outcome()> run;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

std::string g_cli_path;

// 1. Every protocol on every finite bundled scenario stays on the simplex.
Outcome simplex_conservation() {
  double worst_sum = 0.0;
  double lowest = 1.0;
  std::size_t runs = 0;
  for (const auto& name : testkit::finite_bundled_names()) {
    const auto sc = testkit::bundled(name);
    for (auto protocol : dynamics::kAllProtocols) {
      const auto kernel = dynamics::scenario_protocol_kernel(sc, protocol, 0.1);
      dynamics::IntegratorConfig cfg;
      cfg.method = dynamics::Method::Rk4;
      cfg.step = 1e-3;
      cfg.horizon = 100.0;
      const auto traj = dynamics::integrate_forward(kernel, SimplexVector({sc.m0.row(0).begin(), sc.m0.row(0).end()}), cfg);
      for (const auto& m : traj.points) {
        const auto row = m.row(0);
        worst_sum = std::max(worst_sum, std::abs(sum(row) - 1.0));
        lowest = std::min(lowest, *std::min_element(row.begin(), row.end()));
      }
      ++runs;
    }
  }
  return {worst_sum <= 1e-9 && lowest >= -1e-6,
          format("%zu runs, max |sum m - 1| = %.3g (<= 1e-9), min m = %.3g (>= -1e-6)", runs, worst_sum, lowest)};
}

// 2. Replicator flow on zero-sum rock-paper-scissors conserves m1 m2 m3.
Outcome replicator_invariant() {
  const auto sc = testkit::bundled("rps");
  const auto kernel = dynamics::scenario_protocol_kernel(sc, dynamics::Protocol::Replicator, 0.1);
  dynamics::IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 50.0;
  const auto traj = dynamics::integrate_forward(kernel, SimplexVector({sc.m0.row(0).begin(), sc.m0.row(0).end()}), cfg);
  auto product = [](const Population& m) { return m(0, 0) * m(0, 1) * m(0, 2); };
  const double start = product(traj.points.front());
  double drift = 0.0;
  for (const auto& m : traj.points) drift = std::max(drift, std::abs(product(m) - start));
  return {drift <= 1e-6, format("max |m1 m2 m3 - initial| = %.3g (<= 1e-6) over T=50", drift)};
}

// 3. Backward recursion against plain MDP backward induction.
Outcome bellman_vs_mdp() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> states(2, 4), actions(1, 3), stages(1, 8);
  double worst = 0.0;
  std::size_t policy_mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t S = states(rng), A = actions(rng), T = stages(rng);
    const auto sc = testkit::random_mdp(rng, S, A, T);
    const auto q = testkit::kernel_tensor(sc, sc.m0);
    const auto r = testkit::running_table(sc, sc.m0);
    std::vector<double> g(S);
    for (std::size_t x = 0; x < S; ++x) g[x] = sc.payoff.terminal(0, x, sc.m0);
    const auto expect = oracle::backward_induction(q, r, g, T);
    const auto res = bsk::backward_bellman(sc, MeanFieldTrajectory::constant(sc.m0, sc.horizon.grid()));
    for (std::size_t t = 0; t <= T; ++t)
      for (std::size_t x = 0; x < S; ++x) worst = std::max(worst, std::abs(res.values[t](0, x) - expect.values[t][x]));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t x = 0; x < S; ++x)
        if (res.policy[t].at(0, x)[expect.policy[t][x]] != 1.0) ++policy_mismatches;
  }
  return {worst <= 1e-10 && policy_mismatches == 0,
          format("20 random MDPs: max value error %.3g (<= 1e-10), %zu policy mismatches", worst, policy_mismatches)};
}

// 4. Converged fixed points satisfy the support condition and regenerate themselves.
Outcome fixed_point_consistency() {
  const double tol = 1e-8;
  std::ostringstream detail;
  bool ok = true;
  double worst_repass = 0.0;
  double worst_gap = 0.0;
  std::size_t solved = 0;
  for (const auto& name : testkit::finite_bundled_names()) {
    const auto sc = testkit::bundled(name);
    FixedPointOptions opts;
    opts.tolerance = tol;
    opts.damping = 0.5;
    if (sc.kernel.mode == KernelMode::DiscreteProbability) {
      const auto sol = bsk::solve_bsk_fixed_point(sc, opts);
      if (!sol.converged) {
        detail << name << " not converged; ";
        continue;
      }
      const auto report = bsk::verify_support_condition(sc, sol, 1e-6);
      const auto again = bsk::backward_bellman(sc, sol.mean_field);
      const double repass = sup_l1_distance(bsk::forward_kolmogorov(sc, again.policy, sc.m0), sol.mean_field);
      ok = ok && report.ok && repass <= 2.0 * tol;
      worst_gap = std::max(worst_gap, report.worst_gap);
      worst_repass = std::max(worst_repass, repass);
    } else {
      const double dt = sc.horizon.dt;
      const auto sol = hjb::solve_mfg_fixed_point(sc, opts, dt);
      if (!sol.converged) {
        detail << name << " not converged; ";
        continue;
      }
      // Continuous analogue of the support condition: no profitable deviation.
      const double gap = hjb::exploitability(sc, sol, dt).max_gap;
      const auto again = hjb::backward_hjb(sc, sol.mean_field, dt);
      const double repass = sup_l1_distance(hjb::forward_kfe(sc, again.policy, sc.m0, dt), sol.mean_field);
      ok = ok && gap <= 1e-6 && repass <= 2.0 * tol;
      worst_gap = std::max(worst_gap, gap);
      worst_repass = std::max(worst_repass, repass);
    }
    ++solved;
  }
  detail << format("%zu converged solutions, worst support gap %.3g (<= 1e-6), worst re-pass change %.3g (<= %.0e)",
                   solved, worst_gap, worst_repass, 2.0 * tol);
  return {ok && solved > 0, detail.str()};
}

// 5. Risk-sensitive recursion against path enumeration, and its small-mu expansion.
Outcome risk_sensitive_oracle() {
  double worst = 0.0;
  double worst_taylor_ratio = 0.0;
  std::size_t scenarios = 0;
  for (const auto& name : testkit::finite_bundled_names()) {
    const auto sc = testkit::bundled(name);
    if (sc.kernel.mode != KernelMode::DiscreteProbability || sc.space.state_count() != 2 || sc.horizon.stages > 4)
      continue;
    ++scenarios;
    const auto m = MeanFieldTrajectory::constant(sc.m0, sc.horizon.grid());
    const auto q = testkit::kernel_tensor(sc, sc.m0);
    const auto r = testkit::running_table(sc, sc.m0);
    std::vector<double> g(2);
    for (std::size_t x = 0; x < 2; ++x) g[x] = sc.payoff.terminal(0, x, sc.m0);
    auto pure = [](const PolicyTrajectory& u) {
      std::vector<std::vector<std::size_t>> out;
      for (const auto& stage : u.stages) {
        std::vector<std::size_t> row(2);
        for (std::size_t x = 0; x < 2; ++x) row[x] = tie_broken_argmax(stage.at(0, x));
        out.push_back(row);
      }
      return out;
    };
    for (double mu : {1.0, -1.0, 0.1, -0.1}) {
      const auto res = bsk::risk_sensitive_backward(sc, mu, m);
      for (std::size_t x = 0; x < 2; ++x) {
        const auto paths = oracle::enumerate_paths(q, r, g, pure(res.policy), x, mu);
        worst = std::max(worst, std::abs(paths.certainty_equivalent - res.values[0](0, x)));
      }
    }
    const double mu = 1e-2;
    const auto res = bsk::risk_sensitive_backward(sc, mu, m);
    for (std::size_t x = 0; x < 2; ++x) {
      const auto paths = oracle::enumerate_paths(q, r, g, pure(res.policy), x, mu);
      const double gap = std::abs(res.values[0](0, x) - (paths.mean + mu / 2.0 * paths.variance));
      worst_taylor_ratio = std::max(worst_taylor_ratio, gap / (1e-3 * (1.0 + paths.variance)));
    }
  }
  return {scenarios > 0 && worst <= 1e-10 && worst_taylor_ratio <= 1.0,
          format("%zu scenario(s): max |recursion - enumeration| = %.3g (<= 1e-10); mean-variance gap at mu=0.01 is "
                 "%.3g of its bound",
                 scenarios, worst, worst_taylor_ratio)};
}

// 6. Exploitability of the continuous-time crowd-aversion equilibrium.
Outcome mfg_exploitability() {
  const auto sc = testkit::bundled("crowd_jump");
  double previous = 0.0;
  std::vector<double> gaps;
  for (double dt : {1e-3, 5e-4}) {
    const auto sol = hjb::solve_mfg_fixed_point(sc, {}, dt);
    if (!sol.converged) return {false, format("not converged at dt=%g", dt)};
    gaps.push_back(hjb::exploitability(sc, sol, dt).max_gap);
  }
  previous = gaps[0];
  return {previous <= 1e-4 && gaps[1] < gaps[0],
          format("exploitability %.3g at dt=1e-3 (<= 1e-4), %.3g at dt=5e-4 (must be smaller)", gaps[0], gaps[1])};
}

// 7. E sup_t |M^n - m|_1 decays like n^{-1/2}.
Outcome mean_field_rate() {
  const auto sc = testkit::bundled("smooth2");
  nplayer::SimConfig cfg;
  cfg.replications = 200;
  cfg.init = nplayer::InitMode::ExactProportions;
  cfg.seed = 7;
  cfg.record_stride = 10;
  const auto report = nplayer::convergence_study(sc, {100, 400, 1600}, cfg);
  std::ostringstream detail;
  for (const auto& p : report.points) detail << format("n=%zu: %.4g +- %.2g; ", p.n, p.distance.mean, p.distance.std_error);
  detail << format("slope %.3f +- %.3f (in [-0.65, -0.35])", report.fit.slope, report.fit.slope_std_error);
  return {report.fit.slope >= -0.65 && report.fit.slope <= -0.35, detail.str()};
}

// 8. Pairwise product-moment gap vanishes with n; zero for decoupled players.
Outcome propagation_of_chaos() {
  nplayer::SimConfig cfg;
  cfg.replications = 200;
  cfg.seed = 8;
  cfg.record_stride = 100;
  const std::vector<std::vector<double>> phis = {{1.0, 0.0}, {1.0, 0.0}};
  const auto coupled = nplayer::chaos_study(testkit::bundled("herding"), {100, 400, 1600}, cfg, phis);
  const auto decoupled = nplayer::chaos_study(testkit::bundled("decoupled"), {100, 400, 1600}, cfg, phis);
  bool decreasing = true;
  for (std::size_t i = 1; i < coupled.points.size(); ++i)
    decreasing = decreasing && coupled.points[i].gap < coupled.points[i - 1].gap;
  bool independent = true;
  double worst_z = 0.0;
  for (const auto& p : decoupled.points) {
    const double z = p.gap / p.std_error;
    worst_z = std::max(worst_z, z);
    independent = independent && p.gap <= 3.0 * p.std_error;
  }
  std::ostringstream detail;
  detail << "coupled gaps";
  for (const auto& p : coupled.points) detail << format(" %.3g", p.gap);
  detail << format(", slope %.3f (<= -0.3); decoupled max gap/SE %.2f (<= 3)", coupled.fit.slope, worst_z);
  return {decreasing && coupled.fit.slope <= -0.3 && independent, detail.str()};
}

// 9. Limits in n and t do not commute on the cycling RPS flow.
Outcome double_limit() {
  const auto report = nplayer::double_limit_experiment(testkit::bundled("rps"), 1000, 100.0, 9);
  return {report.mf_min_distance >= 0.05 && report.ergodic_distance <= 0.05,
          format("mean-field min distance to rest point %.4f (>= 0.05), ergodic average distance %.4f (<= 0.05)",
                 report.mf_min_distance, report.ergodic_distance)};
}

// 10. Particle scheme rates against the Ornstein-Uhlenbeck limit law.
struct McKeanVlasovRun {
  mkv::MkvRateReport report;
  double variance = 0.0;
  double oracle_variance = 0.0;
  double variance_se = 0.0;
};

const McKeanVlasovRun& mckean_vlasov() {
  static const McKeanVlasovRun run = [] {
    McKeanVlasovRun out;
    const double a = 1.0, b = 0.0, s = std::sqrt(2.0), mean0 = 0.0, var0 = 0.25, T = 5.0;
    const auto model = mkv::ou_model(a, b, s, mean0, var0);
    const auto law = mkv::ou_oracle(a, b, s, mean0, var0, T);
    mkv::RateReference ref;
    ref.analytic = mkv::gaussian_cdf(law.mean, law.variance);
    out.report = mkv::rate_study(model, {250, 1000, 4000}, {4e-3, 1e-3, 2.5e-4}, T, 30, 10, ref);
    const auto x = mkv::simulate_particles(model, 2000, 1e-3, T, 10).final_positions();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) out.variance += (v - mean) * (v - mean);
    out.variance /= static_cast<double>(x.size() - 1);
    out.oracle_variance = law.variance;
    out.variance_se = law.variance * std::sqrt(2.0 / static_cast<double>(x.size() - 1));
    return out;
  }();
  return run;
}

std::string cells(const std::vector<mkv::RateCell>& cells, bool by_n) {
  std::string out;
  for (const auto& c : cells)
    out += by_n ? format("n=%zu: %.4f; ", c.n, c.error.mean) : format("dt=%g: %.4f; ", c.dt, c.error.mean);
  return out;
}

Outcome mckean_vlasov_n() {
  const auto& run = mckean_vlasov();
  const double order = run.report.n_fit.slope;
  const bool var_ok = std::abs(run.variance - run.oracle_variance) <= 3.0 * run.variance_se;
  return {order >= -0.65 && order <= -0.35 && var_ok,
          cells(run.report.by_n, true) +
              format("order in n %.3f (in [-0.65, -0.35]); variance at T=5 %.4f vs %.4f, |diff| %.4f (<= 3 SE = %.4f)",
                     order, run.variance, run.oracle_variance, std::abs(run.variance - run.oracle_variance),
                     3.0 * run.variance_se)};
}

Outcome mckean_vlasov_dt() {
  const auto& run = mckean_vlasov();
  const double order = run.report.dt_fit.slope;
  return {order >= 0.3 && order <= 0.7,
          cells(run.report.by_dt, false) + format("order in dt %.3f (in [0.3, 0.7])", order)};
}

// 11. CSMA time-averaged backoff law against the mean-field fixed point.
Outcome csma_consistency() {
  const auto doc = io::load_scenario_file(testkit::scenario_path("csma"));
  const auto& spec = *doc.csma;
  const auto study = nplayer::csma_study(spec.params, spec.n, spec.slots, spec.burn_in, 11);
  return {study.l1 <= 0.05, format("n=%zu, %zu slots: L1 distance %.4f (<= 0.05)", spec.n, spec.slots, study.l1)};
}

// 12. Every CLI command reruns from its manifest to byte-identical artifacts.
int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Artifact files except the manifest, which records wall-clock time.
std::vector<fs::path> artifacts(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") out.push_back(e.path().filename());
  std::sort(out.begin(), out.end());
  return out;
}

Outcome cli_reproducibility() {
  if (g_cli_path.empty()) return {false, "no --cli path given"};
  const std::string cli = g_cli_path;
  const std::string scen = MFGKIT_SCENARIO_DIR;
  const fs::path root = fs::temp_directory_path() / format("mfgkit_accept_%d", static_cast<int>(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"dynamics_run", "dynamics run --scenario " + scen + "/rps.toml --protocol smith --T 5"},
      {"dynamics_restpoints", "dynamics restpoints --scenario " + scen + "/rps.toml --seeds 6"},
      {"bsk_solve", "bsk solve --scenario " + scen + "/crowd.toml --tol 1e-8"},
      {"bsk_verify", "bsk verify --scenario " + scen + "/crowd.toml --tol 1e-8"},
      {"bsk_risk", "bsk risk --scenario " + scen + "/lottery.toml --mu 0.5"},
      {"mfg_solve", "mfg solve --scenario " + scen + "/crowd_jump.toml --dt 2e-3"},
      {"mfg_control", "mfg control --scenario " + scen + "/crowd_jump.toml --grid-k 8 --dt 1e-2"},
      {"nplayer_run", "nplayer run --scenario " + scen + "/herding.toml --n 200 --reps 8 --tagged 2"},
      {"nplayer_rate", "nplayer rate --scenario " + scen + "/smooth2.toml --ns 50,100,200 --reps 30 --exact-init"},
      {"nplayer_chaos", "nplayer chaos --scenario " + scen + "/herding.toml --ns 50,100,200 --reps 30"},
      {"nplayer_doublelimit", "nplayer doublelimit --scenario " + scen + "/rps.toml --n 100 --T 10"},
      {"nplayer_csma", "nplayer csma --scenario " + scen + "/csma.toml --n 100 --slots 5000"},
      {"mkv_run", "mkv run --scenario " + scen + "/ou.toml --n 200 --T 1 --reps 3"},
      {"mkv_rate", "mkv rate --scenario " + scen + "/ou.toml --ns 50,100,200 --dts 0.02,0.01,0.005 --T 1 --reps 30"},
  };
  std::ostringstream detail;
  std::size_t identical = 0;
  std::size_t files = 0;
  for (const auto& [label, args] : commands) {
    const fs::path first = root / (label + "_a");
    const fs::path second = root / (label + "_b");
    const int rc = shell(cli + " --seed 42 --threads 1 --out-dir " + first.string() + " " + args);
    if (rc != 0) {
      detail << label << " exited " << rc << "; ";
      continue;
    }
    // Replay with a different worker count.
    const int replay = shell(cli + " --threads 3 replay " + (first / "manifest.json").string() + " --out-dir " +
                             second.string());
    if (replay != 0) {
      detail << label << " replay exited " << replay << "; ";
      continue;
    }
    const auto a = artifacts(first);
    const auto b = artifacts(second);
    bool same = !a.empty() && a == b;
    for (const auto& f : a) same = same && slurp(first / f) == slurp(second / f);
    files += a.size();
    if (same) {
      ++identical;
    } else {
      detail << label << " differs; ";
    }
  }
  fs::remove_all(root);
  detail << format("%zu/%zu commands byte-identical on replay with 3 workers (%zu artifacts)", identical,
                   commands.size(), files);
  return {identical == commands.size(), detail.str()};
}

std::vector<Criterion> criteria() {
  return {
      {"1", "simplex conservation", 10, simplex_conservation},
      {"2", "replicator conserved quantity", 5, replicator_invariant},
      {"3", "backward recursion vs MDP oracle", 5, bellman_vs_mdp},
      {"4", "fixed-point self-consistency", 30, fixed_point_consistency},
      {"5", "risk-sensitive oracle", 10, risk_sensitive_oracle},
      {"6", "continuous-time exploitability", 60, mfg_exploitability},
      {"7", "mean-field convergence rate", 300, mean_field_rate},
      {"8", "propagation of chaos", 300, propagation_of_chaos},
      {"9", "non-commuting limits", 120, double_limit},
      {"10a", "particle rate in n and limit variance", 300, mckean_vlasov_n},
      {"10b", "particle rate in the time step", 300, mckean_vlasov_dt},
      {"11", "CSMA consistency", 120, csma_consistency},
      {"12", "CLI reproducibility", 60, cli_reproducibility},
  };
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only.push_back(argv[++i]);
    } else if (arg == "--cli" && i + 1 < argc) {
      g_cli_path = argv[++i];
    } else if (arg == "--list") {
      for (const auto& c : criteria()) std::printf("%s\t%s\n", c.id.c_str(), c.title.c_str());
      return 0;
    } else {
      std::fprintf(stderr, "usage: %s [--only ID]... [--cli PATH] [--list]\n", argv[0]);
      return 2;
    }
  }
  int failures = 0;
  // 10a and 10b share one study; time them together against one budget.
  double shared_mkv_seconds = 0.0;
  for (const auto& c : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.id == "10a" || c.id == "10b") seconds = (shared_mkv_seconds += seconds);
    const bool in_time = seconds <= c.time_limit;
    const bool pass = out.pass && in_time;
    if (!pass) ++failures;
    std::printf("[%s] %-4s %s: %s; %.1fs (limit %.0fs)\n", pass ? "PASS" : "FAIL", c.id.c_str(), c.title.c_str(),
                out.detail.c_str(), seconds, c.time_limit);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
