#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "fixed_point_options.hpp"
#include "mfg/errors.hpp"
#include "mfg/hjb.hpp"
#include "mfg/simplex_grid.hpp"
#include "run_context.hpp"
#include "serialize.hpp"

namespace mfgcli {

namespace {

inline constexpr std::size_t kMaxControls = 4096;

double resolve_dt(const std::optional<double>& dt, const mfg::ScenarioModel& sc, RunContext& ctx) {
  const double value = dt ? *dt : sc.horizon.dt;
  ctx.config()["dt"] = value;
  return value;
}

struct SolveOptions {
  std::string scenario;
  std::optional<double> dt;
  FixedPointFlags fixed_point;
};

Status run_solve(const SolveOptions& o, RunContext& ctx) {
  ctx.config()["scenario"] = o.scenario;
  const auto sc = finite_scenario(mfg::io::load_scenario_file(o.scenario));
  const double dt = resolve_dt(o.dt, sc, ctx);
  const auto sol = mfg::hjb::solve_mfg_fixed_point(sc, o.fixed_point.resolve(ctx), dt);
  const auto gap = mfg::hjb::exploitability(sc, sol, dt);
  ctx.write_json("solution.json", solution_json(sc.space, sol));
  ctx.write_text("trajectory.csv", trajectory_csv(sc.space, sol.mean_field));
  ctx.write_json("exploitability.json", {{"exploitability", gap.max_gap},
                                         {"weighted_gap", gap.weighted_gap},
                                         {"best_response_value", to_json(gap.best_response_value)},
                                         {"policy_value", to_json(gap.policy_value)}});
  return sol.converged ? Status::Ok : Status::NotConverged;
}

/// Every stationary pure policy, in mixed-radix order over (type, state).
std::vector<mfg::StagePolicy> pure_controls(const mfg::StateSpace& space) {
  std::vector<std::size_t> radix;
  double total = 1.0;
  for (std::size_t k = 0; k < space.type_count(); ++k)
    for (std::size_t x = 0; x < space.state_count(); ++x) {
      radix.push_back(space.action_count(k, x));
      total *= static_cast<double>(radix.back());
    }
  if (total > static_cast<double>(kMaxControls)) {
    mfg::fail(mfg::ErrorCode::TooLarge, "scenario has " + std::to_string(total) + " pure stationary controls; limit is " +
                                            std::to_string(kMaxControls));
  }
  std::vector<mfg::StagePolicy> out;
  std::vector<std::size_t> digit(radix.size(), 0);
  for (std::size_t c = 0; c < static_cast<std::size_t>(total); ++c) {
    mfg::StagePolicy u(space);
    for (std::size_t i = 0; i < radix.size(); ++i) u.at(i / space.state_count(), i % space.state_count())[digit[i]] = 1.0;
    out.push_back(std::move(u));
    for (std::size_t i = 0; i < digit.size() && ++digit[i] == radix[i]; ++i) digit[i] = 0;
  }
  return out;
}

struct ControlOptions {
  std::string scenario;
  std::size_t grid_k = 20;
  std::optional<double> dt;
  std::size_t every = 1;
};

Status run_control(const ControlOptions& o, RunContext& ctx) {
  ctx.config()["scenario"] = o.scenario;
  ctx.config()["grid_k"] = o.grid_k;
  ctx.config()["every"] = o.every;
  const auto sc = finite_scenario(mfg::io::load_scenario_file(o.scenario));
  const double dt = resolve_dt(o.dt, sc, ctx);
  const auto controls = pure_controls(sc.space);
  const auto sol = mfg::hjb::solve_mf_control_simplex_dp(sc, controls, o.grid_k, dt);

  std::vector<std::string> header{"t", "point"};
  for (const auto& s : sc.space.states) header.push_back("m_" + s);
  header.push_back("value");
  header.push_back("control");
  Csv csv(header);
  const std::size_t last = sol.times.size() - 1;
  for (std::size_t t = 0; t <= last; ++t) {
    if (t % o.every != 0 && t != last) continue;
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
      csv.cell(sol.times[t]).cell(i);
      for (double v : sol.grid.point(i)) csv.cell(v);
      csv.cell(sol.values[t][i]);
      if (t < last) {
        csv.cell(sol.control[t][i]);
      } else {
        csv.cell(std::string());
      }
      csv.end_row();
    }
  }
  ctx.write_text("control.csv", csv.str());

  const auto m0 = sc.m0.row(0);
  json policies = json::array();
  for (const auto& u : controls) policies.push_back(to_json(mfg::PolicyTrajectory{{u}})[0]);
  ctx.write_json("control.json", {{"grid_points", sol.grid.size()},
                                  {"value_at_m0", sol.value_at(0, m0)},
                                  {"controls", policies}});
  return Status::Ok;
}

}  // namespace

void add_mfg(CLI::App& root, Registry& registry) {
  auto* group = root.add_subcommand("mfg", "Continuous-time mean-field games and mean-field control");
  group->require_subcommand(1);

  auto solve = std::make_shared<SolveOptions>();
  auto* solve_cmd = group->add_subcommand(
      "solve", "HJB/Kolmogorov fixed point; writes solution.json, trajectory.csv, exploitability.json");
  solve_cmd->add_option("--scenario", solve->scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--dt", solve->dt, "Time step (default: the file's)");
  solve->fixed_point.add_to(solve_cmd);
  registry.push_back({solve_cmd, [solve](RunContext& ctx) { return run_solve(*solve, ctx); }});

  auto control = std::make_shared<ControlOptions>();
  auto* control_cmd = group->add_subcommand(
      "control", "Planner problem over pure stationary controls on a simplex grid; writes control.csv");
  control_cmd->add_option("--scenario", control->scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  control_cmd->add_option("--grid-k", control->grid_k, "Grid resolution 1/k")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  control_cmd->add_option("--dt", control->dt, "Time step (default: the file's)");
  control_cmd->add_option("--every", control->every, "Write every k-th time slice")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  registry.push_back({control_cmd, [control](RunContext& ctx) { return run_control(*control, ctx); }});
}

}  // namespace mfgcli
