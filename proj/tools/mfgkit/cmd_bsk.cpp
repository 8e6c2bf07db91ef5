#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include "CLI11.hpp"
#include "fixed_point_options.hpp"
#include "mfg/bsk.hpp"
#include "mfg/errors.hpp"
#include "run_context.hpp"
#include "serialize.hpp"

namespace mfgcli {

namespace {

mfg::ScenarioModel load_finite(const std::string& path, RunContext& ctx) {
  ctx.config()["scenario"] = path;
  return finite_scenario(mfg::io::load_scenario_file(path));
}

struct SolveOptions {
  std::string scenario;
  FixedPointFlags fixed_point;
};

Status run_solve(const SolveOptions& o, RunContext& ctx) {
  const auto sc = load_finite(o.scenario, ctx);
  const auto sol = mfg::bsk::solve_bsk_fixed_point(sc, o.fixed_point.resolve(ctx));
  ctx.write_json("solution.json", solution_json(sc.space, sol));
  ctx.write_text("trajectory.csv", trajectory_csv(sc.space, sol.mean_field));
  return sol.converged ? Status::Ok : Status::NotConverged;
}

struct VerifyOptions {
  std::string scenario;
  std::string solution;
  double tol = 1e-8;
  FixedPointFlags fixed_point;
};

double max_abs_difference(const mfg::ValueTable& a, const mfg::ValueTable& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const auto fa = a[t].flat();
    const auto fb = b[t].flat();
    if (fa.size() != fb.size()) return INFINITY;
    for (std::size_t i = 0; i < fa.size(); ++i) worst = std::max(worst, std::abs(fa[i] - fb[i]));
  }
  return worst;
}

Status run_verify(const VerifyOptions& o, RunContext& ctx) {
  const auto sc = load_finite(o.scenario, ctx);
  ctx.config()["tol"] = o.tol;
  mfg::MfeSolution sol;
  if (o.solution.empty()) {
    ctx.config()["solution"] = nullptr;
    sol = mfg::bsk::solve_bsk_fixed_point(sc, o.fixed_point.resolve(ctx));
  } else {
    ctx.config()["solution"] = o.solution;
    std::ifstream in(o.solution);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      mfg::fail(mfg::ErrorCode::ConfigParseError, o.solution + ": " + e.what());
    }
    for (const char* key : {"policy", "trajectory", "values"})
      if (!doc.contains(key)) mfg::fail(mfg::ErrorCode::ConfigParseError, o.solution + ": missing field '" + key + "'");
    sol.policy = policy_from_json(doc["policy"], sc.space);
    sol.mean_field = trajectory_from_json(doc["trajectory"]);
    sol.values = values_from_json(doc["values"]);
  }

  const auto repass = mfg::bsk::forward_kolmogorov(sc, sol.policy, sc.m0);
  const double repass_gap = mfg::sup_l1_distance(repass, sol.mean_field);
  const auto bellman = mfg::bsk::backward_bellman(sc, sol.mean_field);
  const double value_gap = max_abs_difference(bellman.values, sol.values);
  const auto support = mfg::bsk::verify_support_condition(sc, sol, o.tol);

  json witnesses = json::array();
  for (const auto& w : support.witnesses)
    witnesses.push_back({{"t", w.t}, {"type", w.type}, {"state", w.state}, {"action", w.action}, {"gap", w.gap}});
  const bool verified = support.ok && repass_gap <= o.tol && value_gap <= o.tol;
  ctx.write_json("verify.json", {{"verified", verified},
                                 {"support_ok", support.ok},
                                 {"support_worst_gap", support.worst_gap},
                                 {"support_witnesses", witnesses},
                                 {"trajectory_repass_gap", repass_gap},
                                 {"value_gap", value_gap}});
  return verified ? Status::Ok : Status::NotConverged;
}

struct RiskOptions {
  std::string scenario;
  double mu = 0.0;
  bool raw = false;
  std::string trajectory = "equilibrium";
  FixedPointFlags fixed_point;
};

Status run_risk(const RiskOptions& o, RunContext& ctx) {
  const auto sc = load_finite(o.scenario, ctx);
  ctx.config()["mu"] = o.mu;
  ctx.config()["log_space"] = !o.raw;
  ctx.config()["trajectory"] = o.trajectory;
  mfg::MeanFieldTrajectory traj;
  bool converged = true;
  if (o.trajectory == "m0") {
    traj = mfg::MeanFieldTrajectory::constant(sc.m0, sc.horizon.grid());
  } else {
    const auto eq = mfg::bsk::solve_bsk_fixed_point(sc, o.fixed_point.resolve(ctx));
    traj = eq.mean_field;
    converged = eq.converged;
  }
  mfg::bsk::RiskOptions options;
  options.log_space = !o.raw;
  const auto risk = mfg::bsk::risk_sensitive_backward(sc, o.mu, traj, options);
  const auto neutral = mfg::bsk::backward_bellman(sc, traj);

  json oracle = nullptr;
  try {
    const auto exact = mfg::bsk::enumerate_risk_value_oracle(sc, o.mu, risk.policy, traj);
    oracle = {{"certainty_equivalent", to_json(exact.certainty_equivalent)},
              {"mean", to_json(exact.mean)},
              {"variance", to_json(exact.variance)},
              {"paths", exact.paths}};
  } catch (const mfg::Error& e) {
    if (e.code() != mfg::ErrorCode::TooLarge) throw;
  }
  ctx.write_json("risk.json", {{"mu", o.mu},
                               {"equilibrium_converged", converged},
                               {"values", to_json(risk.values)},
                               {"policy", to_json(risk.policy)},
                               {"neutral_values", to_json(neutral.values)},
                               {"trajectory", to_json(traj)},
                               {"path_enumeration", oracle}});
  return converged ? Status::Ok : Status::NotConverged;
}

}  // namespace

void add_bsk(CLI::App& root, Registry& registry) {
  auto* group = root.add_subcommand("bsk", "Discrete-time mean-field equilibria");
  group->require_subcommand(1);

  auto solve = std::make_shared<SolveOptions>();
  auto* solve_cmd = group->add_subcommand("solve", "Damped fixed point; writes solution.json and trajectory.csv");
  solve_cmd->add_option("--scenario", solve->scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  solve->fixed_point.add_to(solve_cmd);
  registry.push_back({solve_cmd, [solve](RunContext& ctx) { return run_solve(*solve, ctx); }});

  auto verify = std::make_shared<VerifyOptions>();
  auto* verify_cmd = group->add_subcommand(
      "verify", "Re-check a stored solution (or a fresh solve): support condition, re-pass, values");
  verify_cmd->add_option("--scenario", verify->scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--solution", verify->solution, "solution.json from bsk solve")->check(CLI::ExistingFile);
  verify_cmd->add_option("--tol", verify->tol, "Tolerance of every check")->capture_default_str();
  verify->fixed_point.add_to(verify_cmd, "--solve-tol");
  registry.push_back({verify_cmd, [verify](RunContext& ctx) { return run_verify(*verify, ctx); }});

  auto risk = std::make_shared<RiskOptions>();
  auto* risk_cmd = group->add_subcommand("risk", "Risk-sensitive values along a trajectory; writes risk.json");
  risk_cmd->add_option("--scenario", risk->scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  risk_cmd->add_option("--mu", risk->mu, "Risk parameter (nonzero)")->required();
  risk_cmd->add_flag("--raw", risk->raw, "Multiply in raw exponential space instead of log space");
  risk_cmd->add_option("--trajectory", risk->trajectory, "equilibrium (risk-neutral fixed point) or m0")
      ->check(CLI::IsMember({"equilibrium", "m0"}))
      ->capture_default_str();
  risk->fixed_point.add_to(risk_cmd);
  registry.push_back({risk_cmd, [risk](RunContext& ctx) { return run_risk(*risk, ctx); }});
}

}  // namespace mfgcli
