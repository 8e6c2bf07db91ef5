#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/errors.hpp"
#include "mfg/population_game.hpp"
#include "run_context.hpp"
#include "serialize.hpp"

namespace mfgcli {

namespace {

struct ProtocolOptions {
  std::string scenario;
  std::optional<std::string> protocol;
  std::optional<double> temperature;
  std::optional<double> mutation;
};

struct ResolvedProtocol {
  mfg::ScenarioModel base;
  mfg::dynamics::Protocol protocol;
  double temperature;
  double mutation;
  mfg::dynamics::RateKernel kernel;
};

void add_protocol_options(CLI::App* verb, ProtocolOptions& o) {
  verb->add_option("--scenario", o.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  verb->add_option("--protocol", o.protocol, "replicator, smith, bnn or smoothed-best-response (default: the file's, else replicator)");
  verb->add_option("--temperature", o.temperature, "Softmax temperature for smoothed best response (default: the file's, else 0.1)");
  verb->add_option("--mutation", o.mutation, "Uniform mutation rate (default: the file's, else 0)");
}

ResolvedProtocol resolve(const ProtocolOptions& o, RunContext& ctx) {
  const auto doc = mfg::io::load_scenario_file(o.scenario);
  ResolvedProtocol r{finite_scenario(doc), mfg::dynamics::Protocol::Replicator, 0.1, 0.0, {}};
  const auto& rev = r.base.revision;
  r.protocol = mfg::dynamics::parse_protocol(o.protocol ? *o.protocol : rev ? rev->protocol : "replicator");
  r.temperature = o.temperature ? *o.temperature : rev ? rev->temperature : 0.1;
  r.mutation = o.mutation ? *o.mutation : rev ? rev->mutation : 0.0;
  if (!(r.mutation >= 0.0)) mfg::fail(mfg::ErrorCode::NegativeRate, "--mutation must be >= 0");
  r.kernel = mfg::dynamics::scenario_protocol_kernel(r.base, r.protocol, r.temperature);
  if (r.mutation > 0.0) r.kernel = mfg::dynamics::with_mutation(r.kernel, r.mutation);
  ctx.config()["scenario"] = o.scenario;
  ctx.config()["protocol"] = std::string(mfg::dynamics::to_string(r.protocol));
  ctx.config()["temperature"] = r.temperature;
  ctx.config()["mutation"] = r.mutation;
  return r;
}

std::vector<double> first_row(const mfg::Population& m) {
  const auto row = m.row(0);
  return {row.begin(), row.end()};
}

struct RunOptions : ProtocolOptions {
  std::optional<double> T;
  double dt = 1e-3;
  std::string method = "rk4";
  std::size_t every = 1;
};

Status run_dynamics(const RunOptions& o, RunContext& ctx) {
  const auto r = resolve(o, ctx);
  mfg::dynamics::IntegratorConfig cfg;
  cfg.method = o.method == "euler" ? mfg::dynamics::Method::ExplicitEuler : mfg::dynamics::Method::Rk4;
  cfg.step = o.dt;
  cfg.horizon = o.T ? *o.T : r.base.horizon.mode == mfg::KernelMode::ContinuousRate ? r.base.horizon.T : 10.0;
  ctx.config()["T"] = cfg.horizon;
  ctx.config()["dt"] = cfg.step;
  ctx.config()["method"] = o.method;
  ctx.config()["every"] = o.every;
  const auto traj = mfg::dynamics::integrate_forward(r.kernel, mfg::SimplexVector(first_row(r.base.m0)), cfg);

  mfg::MeanFieldTrajectory kept;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (k % o.every != 0 && k + 1 != traj.size()) continue;
    kept.times.push_back(traj.times[k]);
    kept.points.push_back(traj[k]);
  }
  mfg::StateSpace space = r.base.space;
  space.types = {"default"};
  ctx.write_text("trajectory.csv", trajectory_csv(space, kept));
  return Status::Ok;
}

struct RestOptions : ProtocolOptions {
  std::size_t seeds = 8;
  double tol = 1e-10;
  std::size_t max_iters = 200;
  double nash_tol = 1e-6;
};

Status run_restpoints(const RestOptions& o, RunContext& ctx) {
  const auto r = resolve(o, ctx);
  ctx.config()["seeds"] = o.seeds;
  ctx.config()["tol"] = o.tol;
  ctx.config()["max_iters"] = o.max_iters;
  ctx.config()["nash_tol"] = o.nash_tol;
  const std::size_t states = r.base.space.state_count();
  auto rng = mfg::make_stream(ctx.seed(), 0);
  std::vector<mfg::SimplexVector> starts;
  for (std::size_t i = 0; i < o.seeds; ++i) starts.emplace_back(first_row(mfg::random_profile(1, states, rng)));
  mfg::dynamics::RestPointOptions options;
  options.max_iterations = o.max_iters;
  const auto result = mfg::dynamics::find_rest_points(r.kernel, starts, o.tol, options);

  const auto payoff = mfg::state_payoff(r.base);
  json points = json::array();
  for (const auto& p : result.points) {
    const auto values = p.values();
    const auto eq = mfg::check_population_equilibrium(values, payoff, o.nash_tol);
    points.push_back({{"point", values}, {"is_nash", eq.is_equilibrium}, {"nash_gap", eq.max_gap}});
  }
  json seeds = json::array();
  for (std::size_t i = 0; i < result.seeds.size(); ++i) {
    const auto& s = result.seeds[i];
    seeds.push_back({{"start", starts[i].values()},
                     {"converged", s.converged},
                     {"residual", s.residual},
                     {"iterations", s.iterations},
                     {"point", s.point}});
  }
  ctx.write_json("restpoints.json", {{"states", r.base.space.states}, {"rest_points", points}, {"seeds", seeds}});
  return Status::Ok;
}

}  // namespace

void add_dynamics(CLI::App& root, Registry& registry) {
  auto* group = root.add_subcommand("dynamics", "Evolutionary population dynamics");
  group->require_subcommand(1);

  auto run = std::make_shared<RunOptions>();
  auto* run_cmd = group->add_subcommand("run", "Integrate the revision flow from m0; writes trajectory.csv");
  add_protocol_options(run_cmd, *run);
  run_cmd->add_option("--T", run->T, "Horizon (default: the file's continuous horizon, else 10)");
  run_cmd->add_option("--dt", run->dt, "Step size")->capture_default_str();
  run_cmd->add_option("--method", run->method, "rk4 or euler")
      ->check(CLI::IsMember({"rk4", "euler"}))
      ->capture_default_str();
  run_cmd->add_option("--every", run->every, "Write every k-th grid point")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  registry.push_back({run_cmd, [run](RunContext& ctx) { return run_dynamics(*run, ctx); }});

  auto rest = std::make_shared<RestOptions>();
  auto* rest_cmd = group->add_subcommand("restpoints", "Multistart rest-point search; writes restpoints.json");
  add_protocol_options(rest_cmd, *rest);
  rest_cmd->add_option("--seeds", rest->seeds, "Random starting points")->capture_default_str();
  rest_cmd->add_option("--tol", rest->tol, "Residual tolerance")->capture_default_str();
  rest_cmd->add_option("--max-iters", rest->max_iters, "Iterations per start")->capture_default_str();
  rest_cmd->add_option("--nash-tol", rest->nash_tol, "Tolerance of the equilibrium check")->capture_default_str();
  registry.push_back({rest_cmd, [rest](RunContext& ctx) { return run_restpoints(*rest, ctx); }});
}

}  // namespace mfgcli
