#include <cmath>
#include <random>

#include "builders.hpp"
#include "doctest.h"
#include "mfg/errors.hpp"
#include "mfg/hjb.hpp"
#include "mfg/simplex_grid.hpp"

using namespace mfg;
using hjb::SimplexGrid;

namespace {

std::size_t binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return static_cast<std::size_t>(std::llround(r));
}

std::vector<double> random_point(std::mt19937_64& rng, std::size_t states) {
  const auto m = random_profile(1, states, rng);
  return {m.row(0).begin(), m.row(0).end()};
}

}  // namespace

TEST_CASE("grid size is the stars-and-bars count") {
  for (std::size_t states = 1; states <= 4; ++states)
    for (std::size_t k = 1; k <= 12; ++k) {
      const SimplexGrid grid(states, k);
      CHECK(grid.size() == binomial(k + states - 1, states - 1));
      CHECK(SimplexGrid::expected_size(states, k) == grid.size());
    }
  CHECK_THROWS_AS(SimplexGrid(5, 2), Error);
  CHECK_THROWS_AS(SimplexGrid(3, 0), Error);
}

TEST_CASE("grid points lie on the simplex and index round-trips") {
  const SimplexGrid grid(4, 6);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.point(i);
    CHECK(is_on_simplex(p, 1e-15));
    CHECK(grid.index_of(grid.counts(i)) == static_cast<long>(i));
  }
  const std::vector<int> absent = {7, 0, 0, 0};
  CHECK(grid.index_of(absent) == -1);
}

TEST_CASE("barycentric weights reproduce the point and affine functions") {
  std::mt19937_64 rng(41);
  for (std::size_t states = 2; states <= 4; ++states) {
    const SimplexGrid grid(states, 7);
    std::vector<double> coef(states);
    for (std::size_t x = 0; x < states; ++x) coef[x] = 0.5 * static_cast<double>(x) - 0.3;
    std::vector<double> affine(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto p = grid.point(i);
      for (std::size_t x = 0; x < states; ++x) affine[i] += coef[x] * p[x];
    }
    for (int trial = 0; trial < 200; ++trial) {
      const auto m = random_point(rng, states);
      const auto cell = grid.locate(m);
      CHECK(cell.size <= states);
      double total = 0.0;
      std::vector<double> rebuilt(states, 0.0);
      for (std::size_t v = 0; v < cell.size; ++v) {
        CHECK(cell.weight[v] >= -1e-14);
        total += cell.weight[v];
        const auto p = grid.point(cell.vertex[v]);
        for (std::size_t x = 0; x < states; ++x) rebuilt[x] += cell.weight[v] * p[x];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
      for (std::size_t x = 0; x < states; ++x) CHECK(std::abs(rebuilt[x] - m[x]) <= 1e-13);
      double exact = 0.0;
      for (std::size_t x = 0; x < states; ++x) exact += coef[x] * m[x];
      CHECK(std::abs(grid.interpolate(affine, m) - exact) <= 1e-13);
    }
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) values[i] = std::sin(static_cast<double>(i));
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(grid.interpolate(values, grid.point(i)) - values[i]) <= 1e-14);
  }
}

TEST_CASE("planner without dynamics repeats the static optimum") {
  // Zero generator; payoffs depend on m through crowding.
  auto sc = testkit::bundled("crowd_jump");
  const auto pairwise = sc.payoff.running;
  sc.kernel.row = [](double, std::size_t, std::size_t, std::size_t, const Population&, std::span<double> out) {
    for (double& v : out) v = 0.0;
  };
  sc.payoff.terminal = [](std::size_t, std::size_t x, const Population& m) { return 0.2 * x + m(0, 0); };
  const std::vector<StagePolicy> controls = {StagePolicy::pure(sc.space, 0), StagePolicy::pure(sc.space, 1)};
  const auto sol = hjb::solve_mf_control_simplex_dp(sc, controls, 8, 1e-2);
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    const auto p = sol.grid.point(i);
    const auto m = testkit::single(p);
    double best = -1e300;
    for (std::size_t c = 0; c < 2; ++c) {
      double r = 0.0;
      for (std::size_t x = 0; x < 2; ++x) r += p[x] * pairwise(0.0, 0, x, c, m);
      best = std::max(best, r);
    }
    const double terminal = p[0] * sc.payoff.terminal(0, 0, m) + p[1] * sc.payoff.terminal(0, 1, m);
    for (std::size_t t = 0; t < sol.times.size(); t += 10)
      CHECK(sol.values[t][i] == doctest::Approx(terminal + (1.0 - sol.times[t]) * best).epsilon(1e-12));
  }
}

TEST_CASE("coarsest grid on two states matches the hand recurrence") {
  // State reward (0, 1); control 1 moves mass from state 0 to state 1 at rate 1.
  const auto sc = testkit::table_scenario(KernelMode::ContinuousRate,
                                          {{{0.0, 0.0}, {-1.0, 1.0}}, {{0.0, 0.0}, {0.0, 0.0}}},
                                          {{0.0, 0.0}, {1.0, 1.0}}, {0.0, 0.0}, {1.0, 0.0}, 0, 1.0, 1e-2);
  const std::vector<StagePolicy> controls = {StagePolicy::pure(sc.space, 0), StagePolicy::pure(sc.space, 1)};
  const double dt = 1e-2;
  const auto sol = hjb::solve_mf_control_simplex_dp(sc, controls, 1, dt);
  // Vertex (0, 1) earns the remaining time; vertex (1, 0) mixes toward it at rate 1 per step.
  double at_origin = 0.0;
  for (std::size_t k = 100; k-- > 0;) {
    const double remaining_next = 1.0 - static_cast<double>(k + 1) * dt;
    at_origin = (1.0 - dt) * at_origin + dt * remaining_next;
  }
  const std::vector<double> origin = {1.0, 0.0};
  const std::vector<double> target = {0.0, 1.0};
  CHECK(sol.value_at(0, origin) == doctest::Approx(at_origin).epsilon(1e-12));
  CHECK(sol.value_at(0, target) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.control[0][static_cast<std::size_t>(sol.grid.index_of(std::vector<int>{1, 0}))] == 1);
  // Continuous limit e^{-1}, first order in dt.
  CHECK(std::abs(at_origin - std::exp(-1.0)) <= 1e-2);
}

TEST_CASE("planner value converges under grid refinement") {
  const auto sc = testkit::bundled("crowd_jump");
  const std::vector<StagePolicy> controls = {StagePolicy::pure(sc.space, 0), StagePolicy::pure(sc.space, 1)};
  const std::vector<std::vector<double>> probes = {{0.33, 0.67}, {0.71, 0.29}, {0.5123, 0.4877}};
  std::vector<std::vector<double>> at_probe;
  for (std::size_t k : {10, 20, 40}) {
    const auto sol = hjb::solve_mf_control_simplex_dp(sc, controls, k, 1e-2);
    std::vector<double> v;
    for (const auto& p : probes) v.push_back(sol.value_at(0, p));
    at_probe.push_back(v);
  }
  double d1 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    d1 = std::max(d1, std::abs(at_probe[0][i] - at_probe[1][i]));
    d2 = std::max(d2, std::abs(at_probe[1][i] - at_probe[2][i]));
  }
  CHECK(d1 <= 1.0 / 10.0);
  CHECK(std::log2(d1 / d2) >= 1.0);
}

TEST_CASE("planner value with linear data equals the population-averaged individual value") {
  const auto sc = testkit::table_scenario(KernelMode::ContinuousRate,
                                          {{{-0.5, 0.3, 0.2}}, {{0.1, -0.4, 0.3}}, {{0.6, 0.0, -0.6}}},
                                          {{1.0}, {-0.5}, {0.25}}, {0.0, 1.0, -1.0}, {0.2, 0.5, 0.3}, 0, 1.0,
                                          1e-3);
  const auto sol = hjb::solve_mf_control_simplex_dp(sc, {StagePolicy::pure(sc.space)}, 4, 1e-3);
  const auto m = MeanFieldTrajectory::constant(sc.m0, hjb::time_grid(1.0, 1e-3));
  const auto v = hjb::backward_hjb(sc, m, 1e-3).values[0];
  const std::vector<double> m0 = {0.2, 0.5, 0.3};
  const double averaged = 0.2 * v(0, 0) + 0.5 * v(0, 1) + 0.3 * v(0, 2);
  CHECK(std::abs(sol.value_at(0, m0) - averaged) <= 5e-3);
}

TEST_CASE("planner rejects unsupported inputs") {
  const auto sc = testkit::bundled("crowd_jump");
  CHECK_THROWS_AS(hjb::solve_mf_control_simplex_dp(sc, {}, 4, 1e-2), Error);
  const auto five = testkit::table_scenario(KernelMode::ContinuousRate,
                                            testkit::Tensor3(5, testkit::Table2(1, std::vector<double>(5, 0.0))),
                                            testkit::Table2(5, {0.0}), std::vector<double>(5, 0.0),
                                            {0.2, 0.2, 0.2, 0.2, 0.2}, 0, 1.0, 1e-2);
  try {
    hjb::solve_mf_control_simplex_dp(five, {StagePolicy::pure(five.space)}, 2, 1e-2);
    FAIL("expected StateTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StateTooLarge);
  }
  // A rate of 200 with dt 0.01 overshoots the simplex from the vertex.
  const auto fast = testkit::table_scenario(KernelMode::ContinuousRate, {{{-200.0, 200.0}}, {{0.0, 0.0}}},
                                            {{0.0}, {0.0}}, {0.0, 0.0}, {1.0, 0.0}, 0, 1.0, 1e-2);
  try {
    hjb::solve_mf_control_simplex_dp(fast, {StagePolicy::pure(fast.space)}, 2, 1e-2);
    FAIL("expected OffSimplexStep");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OffSimplexStep);
  }
}
