#include <benchmark/benchmark.h>

#include <random>

#include "mfg/mkv.hpp"
#include "mfg/nplayer.hpp"
#include "mfg/scenario_io.hpp"

namespace {

void BM_NPlayerContinuous(benchmark::State& state) {
  const auto sc = mfg::io::load_scenario(std::string(MFGKIT_SCENARIO_DIR) + "/smooth2.toml");
  mfg::nplayer::SimConfig cfg;
  cfg.n = static_cast<std::size_t>(state.range(0));
  cfg.record_stride = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mfg::nplayer::simulate_nplayer(sc, cfg));
    ++cfg.seed;
  }
}
BENCHMARK(BM_NPlayerContinuous)->Arg(100)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_CsmaSlots(benchmark::State& state) {
  mfg::nplayer::CsmaParams params;
  params.attempt = {{1.0, 0.5, 0.25}};
  for (auto _ : state) benchmark::DoNotOptimize(mfg::nplayer::csma_study(params, 1000, 2000, 200, 1));
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_CsmaSlots)->Unit(benchmark::kMillisecond);

void BM_ParticlesOu(benchmark::State& state) {
  const auto model = mfg::mkv::ou_model(1.0, 0.0, 1.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mfg::mkv::simulate_particles(model, n, 1e-2, 1.0, 3));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n) * 100);
}
BENCHMARK(BM_ParticlesOu)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_W1Gaussian(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (double& v : x) v = normal(rng);
  const auto f = mfg::mkv::empirical_cdf(x);
  const auto g = mfg::mkv::gaussian_cdf(0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(mfg::mkv::w1_distance(f, g));
}
BENCHMARK(BM_W1Gaussian)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
