#include <benchmark/benchmark.h>

#include "mfg/bsk.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/hjb.hpp"
#include "mfg/scenario_io.hpp"
#include "mfg/simplex_grid.hpp"

namespace {

mfg::ScenarioModel bundled(const char* name) {
  return mfg::io::load_scenario(std::string(MFGKIT_SCENARIO_DIR) + "/" + name + ".toml");
}

void BM_ReplicatorRk4(benchmark::State& state) {
  const auto sc = bundled("rps");
  const auto kernel = mfg::dynamics::scenario_protocol_kernel(sc, mfg::dynamics::Protocol::Replicator, 0.1);
  const mfg::SimplexVector m0({sc.m0.row(0).begin(), sc.m0.row(0).end()});
  mfg::dynamics::IntegratorConfig cfg;
  cfg.horizon = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mfg::dynamics::integrate_forward(kernel, m0, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(cfg.horizon / cfg.step));
}
BENCHMARK(BM_ReplicatorRk4)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_BskFixedPoint(benchmark::State& state) {
  const auto sc = bundled("crowd");
  for (auto _ : state) benchmark::DoNotOptimize(mfg::bsk::solve_bsk_fixed_point(sc));
}
BENCHMARK(BM_BskFixedPoint)->Unit(benchmark::kMicrosecond);

void BM_BackwardBellman(benchmark::State& state) {
  const auto sc = bundled("lottery");
  const auto traj = mfg::MeanFieldTrajectory::constant(sc.m0, sc.horizon.grid());
  for (auto _ : state) benchmark::DoNotOptimize(mfg::bsk::backward_bellman(sc, traj));
}
BENCHMARK(BM_BackwardBellman);

void BM_HjbFixedPoint(benchmark::State& state) {
  const auto sc = bundled("crowd_jump");
  const double dt = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mfg::hjb::solve_mfg_fixed_point(sc, {}, dt));
}
BENCHMARK(BM_HjbFixedPoint)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SimplexControl(benchmark::State& state) {
  const auto sc = bundled("crowd_jump");
  const std::vector<mfg::StagePolicy> controls = {mfg::StagePolicy::pure(sc.space, 0),
                                                  mfg::StagePolicy::pure(sc.space, 1)};
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mfg::hjb::solve_mf_control_simplex_dp(sc, controls, k, 1e-2));
}
BENCHMARK(BM_SimplexControl)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace
