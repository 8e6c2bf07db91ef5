#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "mfg/bsk.hpp"
#include "mfg/errors.hpp"
#include "mfg/hjb.hpp"
#include "mfg/nplayer.hpp"
#include "run_context.hpp"
#include "serialize.hpp"

namespace mfgcli {

namespace {

using mfg::nplayer::SimConfig;

struct SimFlags {
  std::string scenario;
  std::size_t reps = 30;
  bool exact_init = false;
  std::size_t record_stride = 10;
  std::string policy = "first";

  void add_to(CLI::App* verb) {
    verb->add_option("--scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    verb->add_option("--reps", reps, "Independent replications")->check(CLI::PositiveNumber)->capture_default_str();
    verb->add_flag("--exact-init", exact_init, "Largest-remainder initial profile instead of i.i.d. draws");
    verb->add_option("--record-stride", record_stride, "Continuous mode: record every k-th grid step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    verb->add_option("--policy", policy, "first (action 0), uniform, or equilibrium (solve the limit game first)")
        ->check(CLI::IsMember({"first", "uniform", "equilibrium"}))
        ->capture_default_str();
  }

  /// Loads the scenario and fills every field of `cfg` except n; false if the equilibrium solve did not converge.
  bool resolve(RunContext& ctx, mfg::ScenarioModel& sc, SimConfig& cfg) const {
    ctx.config()["scenario"] = scenario;
    ctx.config()["reps"] = reps;
    ctx.config()["exact_init"] = exact_init;
    ctx.config()["record_stride"] = record_stride;
    ctx.config()["policy"] = policy;
    sc = finite_scenario(mfg::io::load_scenario_file(scenario));
    cfg.seed = ctx.seed();
    cfg.replications = reps;
    cfg.init = exact_init ? mfg::nplayer::InitMode::ExactProportions : mfg::nplayer::InitMode::Iid;
    cfg.record_stride = record_stride;
    cfg.threads = ctx.threads();
    if (policy == "uniform") cfg.stationary_policy = mfg::StagePolicy::uniform(sc.space);
    if (policy != "equilibrium") return true;
    const auto sol = sc.horizon.mode == mfg::KernelMode::DiscreteProbability
                         ? mfg::bsk::solve_bsk_fixed_point(sc)
                         : mfg::hjb::solve_mfg_fixed_point(sc, {}, sc.horizon.dt);
    cfg.policy = sol.policy;
    return sol.converged;
  }
};

struct RunOptions {
  SimFlags sim;
  std::size_t n = 100;
  std::size_t tagged = 0;
};

Status run_run(const RunOptions& o, RunContext& ctx) {
  mfg::ScenarioModel sc;
  SimConfig cfg;
  const bool converged = o.sim.resolve(ctx, sc, cfg);
  cfg.n = o.n;
  cfg.tagged = o.tagged;
  ctx.config()["n"] = o.n;
  ctx.config()["tagged"] = o.tagged;
  const auto traj = mfg::nplayer::simulate_nplayer(sc, cfg);
  const auto reference = mfg::nplayer::mean_field_reference(sc, cfg);
  const auto columns = profile_columns(sc.space);

  std::vector<std::string> header{"rep", "t"};
  for (const auto& c : columns) header.push_back(c);
  Csv reps(header);
  std::vector<double> distances;
  for (std::size_t r = 0; r < traj.replications.size(); ++r) {
    const auto& profiles = traj.replications[r].profiles;
    for (std::size_t k = 0; k < profiles.size(); ++k) {
      reps.cell(r).cell(traj.times[k]);
      append_profile(reps, profiles[k]);
      reps.end_row();
    }
    distances.push_back(mfg::nplayer::l1_trajectory_distance(traj.times, profiles, reference));
  }
  ctx.write_text("replications.csv", reps.str());

  header = {"t"};
  for (const auto& c : columns) header.push_back(c);
  Csv mean(header);
  const auto averaged = traj.mean();
  for (std::size_t k = 0; k < averaged.size(); ++k) {
    mean.cell(traj.times[k]);
    append_profile(mean, averaged[k]);
    mean.end_row();
  }
  ctx.write_text("mean.csv", mean.str());
  ctx.write_text("mean_field.csv", trajectory_csv(sc.space, reference));

  if (o.tagged > 0) {
    Csv tagged({"rep", "player", "t", "state"});
    for (std::size_t r = 0; r < traj.replications.size(); ++r)
      for (std::size_t j = 0; j < traj.replications[r].tagged.size(); ++j)
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
          tagged.cell(r).cell(j).cell(traj.times[k]).cell(sc.space.states[traj.replications[r].tagged[j][k]]);
          tagged.end_row();
        }
    ctx.write_text("tagged.csv", tagged.str());
  }

  json events = json::array();
  for (const auto& rep : traj.replications) events.push_back(rep.events);
  ctx.write_json("run.json", {{"type_counts", traj.type_counts},
                              {"sup_l1_distance", to_json(mfg::estimate_mean(distances))},
                              {"sup_l1_per_replication", distances},
                              {"events", events},
                              {"policy_converged", converged}});
  return converged ? Status::Ok : Status::NotConverged;
}

struct RateOptions {
  SimFlags sim;
  std::vector<std::size_t> ns;
};

Status run_rate(const RateOptions& o, RunContext& ctx) {
  mfg::ScenarioModel sc;
  SimConfig cfg;
  const bool converged = o.sim.resolve(ctx, sc, cfg);
  ctx.config()["ns"] = o.ns;
  const auto report = mfg::nplayer::convergence_study(sc, o.ns, cfg);
  Csv csv({"n", "mean", "std_error", "count"});
  json points = json::array();
  for (const auto& p : report.points) {
    csv.cell(p.n).cell(p.distance.mean).cell(p.distance.std_error).cell(p.distance.count);
    csv.end_row();
    points.push_back({{"n", p.n}, {"distance", to_json(p.distance)}});
  }
  ctx.write_text("rate.csv", csv.str());
  ctx.write_json("rate.json", {{"points", points}, {"fit", to_json(report.fit)}, {"policy_converged", converged}});
  return converged ? Status::Ok : Status::NotConverged;
}

struct ChaosOptions {
  SimFlags sim;
  std::vector<std::size_t> ns;
  std::vector<double> phi1;
  std::vector<double> phi2;
};

Status run_chaos(const ChaosOptions& o, RunContext& ctx) {
  mfg::ScenarioModel sc;
  SimConfig cfg;
  const bool converged = o.sim.resolve(ctx, sc, cfg);
  std::vector<double> indicator(sc.space.state_count(), 0.0);
  indicator[0] = 1.0;
  const std::vector<std::vector<double>> phis = {o.phi1.empty() ? indicator : o.phi1,
                                                 o.phi2.empty() ? indicator : o.phi2};
  for (const auto& phi : phis)
    if (phi.size() != sc.space.state_count()) {
      mfg::fail(mfg::ErrorCode::ShapeMismatch, "test functions need one value per state");
    }
  ctx.config()["ns"] = o.ns;
  ctx.config()["phi1"] = phis[0];
  ctx.config()["phi2"] = phis[1];
  const auto report = mfg::nplayer::chaos_study(sc, o.ns, cfg, phis);
  Csv csv({"n", "gap", "covariance", "std_error", "tagged_gap", "tagged_std_error"});
  json points = json::array();
  for (const auto& p : report.points) {
    csv.cell(p.n).cell(p.gap).cell(p.covariance).cell(p.std_error).cell(p.tagged_gap).cell(p.tagged_std_error);
    csv.end_row();
    points.push_back({{"n", p.n},
                      {"gap", p.gap},
                      {"covariance", p.covariance},
                      {"std_error", p.std_error},
                      {"tagged_gap", p.tagged_gap},
                      {"tagged_std_error", p.tagged_std_error}});
  }
  ctx.write_text("chaos.csv", csv.str());
  ctx.write_json("chaos.json", {{"points", points}, {"fit", to_json(report.fit)}, {"policy_converged", converged}});
  return converged ? Status::Ok : Status::NotConverged;
}

struct DoubleLimitOptions {
  std::string scenario;
  std::size_t n = 1000;
  double T = 100.0;
};

Status run_double_limit(const DoubleLimitOptions& o, RunContext& ctx) {
  ctx.config()["scenario"] = o.scenario;
  ctx.config()["n"] = o.n;
  ctx.config()["T"] = o.T;
  const auto sc = finite_scenario(mfg::io::load_scenario_file(o.scenario));
  const auto r = mfg::nplayer::double_limit_experiment(sc, o.n, o.T, ctx.seed(), ctx.threads());
  ctx.write_json("doublelimit.json", {{"rest_point", r.rest_point},
                                      {"mean_field_min_distance", r.mf_min_distance},
                                      {"ergodic_average", r.ergodic_average},
                                      {"ergodic_distance", r.ergodic_distance},
                                      {"window", {r.window_start, r.window_end}},
                                      {"metric", r.metric}});
  return Status::Ok;
}

struct CsmaOptions {
  std::string scenario;
  std::optional<std::size_t> n;
  std::optional<std::size_t> slots;
  std::optional<std::size_t> burn_in;
};

Status run_csma(const CsmaOptions& o, RunContext& ctx) {
  const auto doc = mfg::io::load_scenario_file(o.scenario);
  if (!doc.csma) mfg::fail(mfg::ErrorCode::ConfigParseError, o.scenario + ": no [csma] section");
  const auto& spec = *doc.csma;
  const std::size_t n = o.n.value_or(spec.n);
  const std::size_t slots = o.slots.value_or(spec.slots);
  const std::size_t burn_in = o.burn_in ? *o.burn_in : spec.burn_in < slots ? spec.burn_in : slots / 10;
  ctx.config()["scenario"] = o.scenario;
  ctx.config()["n"] = n;
  ctx.config()["slots"] = slots;
  ctx.config()["burn_in"] = burn_in;
  const auto study = mfg::nplayer::csma_study(spec.params, n, slots, burn_in, ctx.seed());
  Csv csv({"type", "state", "simulated", "mean_field"});
  for (std::size_t k = 0; k < study.simulated.types(); ++k)
    for (std::size_t x = 0; x < study.simulated.states(); ++x) {
      csv.cell(k).cell(x).cell(study.simulated(k, x)).cell(study.mean_field(k, x));
      csv.end_row();
    }
  ctx.write_text("csma.csv", csv.str());
  ctx.write_json("csma.json", {{"simulated", to_json(study.simulated)},
                               {"mean_field", to_json(study.mean_field)},
                               {"l1_distance", study.l1}});
  return Status::Ok;
}

}  // namespace

void add_nplayer(CLI::App& root, Registry& registry) {
  auto* group = root.add_subcommand("nplayer", "Finite-population simulation and convergence studies");
  group->require_subcommand(1);

  auto run = std::make_shared<RunOptions>();
  auto* run_cmd = group->add_subcommand("run", "Simulate n players; writes per-time empirical measures");
  run->sim.add_to(run_cmd);
  run_cmd->add_option("--n", run->n, "Players")->check(CLI::PositiveNumber)->capture_default_str();
  run_cmd->add_option("--tagged", run->tagged, "Record the states of the first k players")->capture_default_str();
  registry.push_back({run_cmd, [run](RunContext& ctx) { return run_run(*run, ctx); }});

  auto rate = std::make_shared<RateOptions>();
  auto* rate_cmd = group->add_subcommand("rate", "E sup_t |M^n - m|_1 against n with a log-log fit");
  rate->sim.add_to(rate_cmd);
  rate_cmd->add_option("--ns", rate->ns, "Comma-separated population sizes")->required()->delimiter(',');
  registry.push_back({rate_cmd, [rate](RunContext& ctx) { return run_rate(*rate, ctx); }});

  auto chaos = std::make_shared<ChaosOptions>();
  auto* chaos_cmd = group->add_subcommand("chaos", "Pairwise product-moment gap against n");
  chaos->sim.add_to(chaos_cmd);
  chaos_cmd->add_option("--ns", chaos->ns, "Comma-separated population sizes")->required()->delimiter(',');
  chaos_cmd->add_option("--phi1", chaos->phi1, "Test function of player 1, one value per state")->delimiter(',');
  chaos_cmd->add_option("--phi2", chaos->phi2, "Test function of player 2, one value per state")->delimiter(',');
  registry.push_back({chaos_cmd, [chaos](RunContext& ctx) { return run_chaos(*chaos, ctx); }});

  auto dl = std::make_shared<DoubleLimitOptions>();
  auto* dl_cmd = group->add_subcommand("doublelimit", "Mean-field flow against the long-run finite-n average");
  dl_cmd->add_option("--scenario", dl->scenario, "Scenario file with a revision kernel")
      ->required()
      ->check(CLI::ExistingFile);
  dl_cmd->add_option("--n", dl->n, "Players")->check(CLI::PositiveNumber)->capture_default_str();
  dl_cmd->add_option("--T", dl->T, "Horizon")->capture_default_str();
  registry.push_back({dl_cmd, [dl](RunContext& ctx) { return run_double_limit(*dl, ctx); }});

  auto csma = std::make_shared<CsmaOptions>();
  auto* csma_cmd = group->add_subcommand("csma", "Backoff occupancy of n nodes against the mean-field fixed point");
  csma_cmd->add_option("--scenario", csma->scenario, "Scenario file with a [csma] section")
      ->required()
      ->check(CLI::ExistingFile);
  csma_cmd->add_option("--n", csma->n, "Nodes (default: the file's)");
  csma_cmd->add_option("--slots", csma->slots, "Simulated slots (default: the file's)");
  csma_cmd->add_option("--burn-in", csma->burn_in, "Slots discarded before averaging (default: the file's)");
  registry.push_back({csma_cmd, [csma](RunContext& ctx) { return run_csma(*csma, ctx); }});
}

}  // namespace mfgcli
