#include "builders.hpp"

#include "mfg/scenario_io.hpp"

namespace testkit {

using mfg::KernelMode;
using mfg::Population;
using mfg::ScenarioModel;

Population single(const std::vector<double>& m) { return mfg::StateTable::from_rows({m}); }

ScenarioModel table_scenario(KernelMode mode, const Tensor3& kernel, const Table2& running,
                             const std::vector<double>& terminal, const std::vector<double>& m0,
                             std::size_t stages, double T, double dt) {
  const std::size_t S = kernel.size();
  const std::size_t A = kernel[0].size();
  ScenarioModel sc;
  sc.name = "table";
  std::vector<std::string> states, actions;
  for (std::size_t x = 0; x < S; ++x) states.push_back("s" + std::to_string(x));
  for (std::size_t a = 0; a < A; ++a) actions.push_back("a" + std::to_string(a));
  sc.space = mfg::StateSpace::uniform(states, actions);
  sc.horizon.mode = mode;
  sc.horizon.stages = stages;
  sc.horizon.T = T;
  sc.horizon.dt = dt;
  sc.kernel.mode = mode;
  sc.kernel.row = [kernel](double, std::size_t, std::size_t x, std::size_t a, const Population&,
                           std::span<double> out) {
    for (std::size_t y = 0; y < out.size(); ++y) out[y] = kernel[x][a][y];
  };
  sc.payoff.running = [running](double, std::size_t, std::size_t x, std::size_t a, const Population&) {
    return running[x][a];
  };
  sc.payoff.terminal = [terminal](std::size_t, std::size_t x, const Population&) { return terminal[x]; };
  sc.m0 = single(m0);
  return mfg::validate_scenario(std::move(sc));
}

ScenarioModel random_mdp(std::mt19937_64& rng, std::size_t states, std::size_t actions, std::size_t stages) {
  std::uniform_int_distribution<int> lattice(-4, 4);
  std::exponential_distribution<double> e(1.0);
  Tensor3 q(states, Table2(actions, std::vector<double>(states)));
  for (auto& per_action : q)
    for (auto& row : per_action) {
      double total = 0.0;
      for (double& v : row) total += (v = e(rng));
      for (double& v : row) v /= total;
    }
  Table2 r(states, std::vector<double>(actions));
  for (auto& row : r)
    for (double& v : row) v = 0.25 * lattice(rng);
  std::vector<double> g(states);
  for (double& v : g) v = 0.25 * lattice(rng);
  std::vector<double> m0(states);
  double total = 0.0;
  for (double& v : m0) total += (v = e(rng));
  for (double& v : m0) v /= total;
  return table_scenario(KernelMode::DiscreteProbability, q, r, g, m0, stages);
}

ScenarioModel random_coupled(std::mt19937_64& rng, std::size_t states, std::size_t actions,
                             std::size_t stages) {
  ScenarioModel base = random_mdp(rng, states, actions, stages);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor3 pull(states, Table2(actions, std::vector<double>(states)));
  for (auto& per_action : pull)
    for (auto& row : per_action)
      for (double& v : row) v = u(rng);
  const Tensor3 q0 = kernel_tensor(base, base.m0);
  const Table2 r0 = running_table(base, base.m0);
  // q(m) = (1 - 0.5 m_0) q0 + 0.5 m_0 e_{argmax pull}; r(m) = r0 - m(x) crowding.
  base.kernel.row = [q0, pull](double, std::size_t, std::size_t x, std::size_t a, const Population& m,
                               std::span<double> out) {
    const double w = 0.5 * m(0, 0);
    std::size_t target = 0;
    for (std::size_t y = 1; y < out.size(); ++y)
      if (pull[x][a][y] > pull[x][a][target]) target = y;
    for (std::size_t y = 0; y < out.size(); ++y) out[y] = (1.0 - w) * q0[x][a][y] + (y == target ? w : 0.0);
  };
  base.payoff.running = [r0](double, std::size_t, std::size_t x, std::size_t a, const Population& m) {
    return r0[x][a] - m(0, x);
  };
  return mfg::validate_scenario(std::move(base));
}

Tensor3 kernel_tensor(const ScenarioModel& sc, const Population& m, double t) {
  const std::size_t S = sc.space.state_count();
  Tensor3 q(S);
  for (std::size_t x = 0; x < S; ++x) {
    q[x].resize(sc.space.action_count(0, x), std::vector<double>(S));
    for (std::size_t a = 0; a < q[x].size(); ++a) sc.kernel.row(t, 0, x, a, m, q[x][a]);
  }
  return q;
}

Table2 running_table(const ScenarioModel& sc, const Population& m, double t) {
  const std::size_t S = sc.space.state_count();
  Table2 r(S);
  for (std::size_t x = 0; x < S; ++x)
    for (std::size_t a = 0; a < sc.space.action_count(0, x); ++a) r[x].push_back(sc.payoff.running(t, 0, x, a, m));
  return r;
}

ScenarioModel two_state_rates(double up, double down, std::vector<double> m0, double T, double dt) {
  return table_scenario(KernelMode::ContinuousRate, {{{-up, up}}, {{down, -down}}}, {{0.0}, {0.0}}, {0.0, 0.0},
                        std::move(m0), 1, T, dt);
}

std::vector<double> rps_payoff(std::span<const double> m) {
  return {m[2] - m[1], m[0] - m[2], m[1] - m[0]};
}

std::string scenario_path(const std::string& name) { return std::string(MFGKIT_SCENARIO_DIR) + "/" + name + ".toml"; }

ScenarioModel bundled(const std::string& name) { return mfg::io::load_scenario(scenario_path(name)); }

std::vector<std::string> finite_bundled_names() {
  return {"rps", "crowd", "crowd_jump", "lottery", "anti", "smooth2", "herding", "decoupled", "csma"};
}

}  // namespace testkit
