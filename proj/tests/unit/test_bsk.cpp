#include <cmath>
#include <limits>
#include <random>

#include "builders.hpp"
#include "doctest.h"
#include "mfg/bsk.hpp"
#include "mfg/errors.hpp"
#include "oracles.hpp"

using namespace mfg;
using testkit::single;

namespace {

MeanFieldTrajectory constant_m0(const ScenarioModel& sc) {
  return MeanFieldTrajectory::constant(sc.m0, sc.horizon.grid());
}

std::size_t chosen(const StagePolicy& u, std::size_t x) {
  const auto p = u.at(0, x);
  for (std::size_t a = 0; a < p.size(); ++a)
    if (p[a] == 1.0) return a;
  return p.size();
}

}  // namespace

TEST_CASE("terminal-only horizon") {
  auto sc = testkit::table_scenario(KernelMode::DiscreteProbability, {{{1.0, 0.0}}, {{0.0, 1.0}}}, {{0.0}, {0.0}},
                                    {2.0, -1.0}, {0.5, 0.5}, 1);
  sc.horizon.stages = 0;
  const auto res = bsk::backward_bellman(sc, MeanFieldTrajectory::constant(sc.m0, {0.0}));
  CHECK(res.policy.size() == 0);
  REQUIRE(res.values.size() == 1);
  CHECK(res.values[0](0, 0) == 2.0);
  CHECK(res.values[0](0, 1) == -1.0);
}

TEST_CASE("single state with a dominant action") {
  const auto sc =
      testkit::table_scenario(KernelMode::DiscreteProbability, {{{1.0}, {1.0}}}, {{0.0, 1.0}}, {0.0}, {1.0}, 1);
  const auto res = bsk::backward_bellman(sc, constant_m0(sc));
  CHECK(res.values[0](0, 0) == 1.0);
  // Zero-based: the second action.
  CHECK(chosen(res.policy[0], 0) == 1);
}

TEST_CASE("backward recursion matches plain MDP induction on random instances") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const auto sc = testkit::random_mdp(rng, 3, 2, 5);
    const auto q = testkit::kernel_tensor(sc, sc.m0);
    const auto r = testkit::running_table(sc, sc.m0);
    std::vector<double> g(3);
    for (std::size_t x = 0; x < 3; ++x) g[x] = sc.payoff.terminal(0, x, sc.m0);
    const auto expect = oracle::backward_induction(q, r, g, 5);
    const auto res = bsk::backward_bellman(sc, constant_m0(sc));
    for (std::size_t t = 0; t <= 5; ++t)
      for (std::size_t x = 0; x < 3; ++x) CHECK(std::abs(res.values[t](0, x) - expect.values[t][x]) <= 1e-12);
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t x = 0; x < 3; ++x) CHECK(chosen(res.policy[t], x) == expect.policy[t][x]);
  }
}

TEST_CASE("backward recursion checks its inputs") {
  const auto sc = testkit::two_state_rates(1.0, 1.0, {0.5, 0.5}, 1.0, 0.5);
  CHECK_THROWS_AS(bsk::backward_bellman(sc, constant_m0(sc)), Error);
  const auto d = testkit::table_scenario(KernelMode::DiscreteProbability, {{{1.0}}}, {{0.0}}, {0.0}, {1.0}, 3);
  CHECK_THROWS_AS(bsk::backward_bellman(d, MeanFieldTrajectory::constant(d.m0, {0.0, 1.0})), Error);
}

TEST_CASE("forward equation examples") {
  const auto identity = testkit::table_scenario(KernelMode::DiscreteProbability, {{{1.0, 0.0}}, {{0.0, 1.0}}},
                                                {{0.0}, {0.0}}, {0.0, 0.0}, {0.3, 0.7}, 3);
  PolicyTrajectory u{std::vector<StagePolicy>(3, StagePolicy::pure(identity.space))};
  const auto still = bsk::forward_kolmogorov(identity, u, identity.m0);
  for (const auto& m : still.points) CHECK(m == identity.m0);

  const auto absorb = testkit::table_scenario(KernelMode::DiscreteProbability, {{{0.0, 1.0}}, {{0.0, 1.0}}},
                                              {{0.0}, {0.0}}, {0.0, 0.0}, {0.3, 0.7}, 1);
  PolicyTrajectory u1{std::vector<StagePolicy>(1, StagePolicy::pure(absorb.space))};
  CHECK(bsk::forward_kolmogorov(absorb, u1, absorb.m0).points[1](0, 1) == 1.0);

  const auto mix = testkit::table_scenario(KernelMode::DiscreteProbability, {{{0.5, 0.5}}, {{0.5, 0.5}}},
                                           {{0.0}, {0.0}}, {0.0, 0.0}, {1.0, 0.0}, 2);
  PolicyTrajectory u2{std::vector<StagePolicy>(2, StagePolicy::pure(mix.space))};
  const auto m = bsk::forward_kolmogorov(mix, u2, mix.m0);
  CHECK(m.points[1](0, 0) == 0.5);
  CHECK(m.points[2](0, 1) == 0.5);
}

TEST_CASE("forward equation stays on the simplex under random policies") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sc = testkit::random_coupled(rng, 4, 3, 6);
    PolicyTrajectory u;
    for (std::size_t t = 0; t < 6; ++t) {
      StagePolicy p(sc.space);
      for (std::size_t x = 0; x < 4; ++x) {
        double total = 0.0;
        for (double& v : p.at(0, x)) total += (v = w(rng));
        for (double& v : p.at(0, x)) v /= total;
      }
      u.stages.push_back(p);
    }
    for (const auto& m : bsk::forward_kolmogorov(sc, u, sc.m0).points) CHECK(is_on_simplex(m.row(0), 1e-12));
  }
}

TEST_CASE("uncoupled scenario converges at once to the MDP solution") {
  std::mt19937_64 rng(23);
  const auto sc = testkit::random_mdp(rng, 3, 2, 4);
  const auto sol = bsk::solve_bsk_fixed_point(sc);
  CHECK(sol.converged);
  CHECK(sol.iterations == 1);
  const auto direct = bsk::backward_bellman(sc, constant_m0(sc));
  for (std::size_t t = 0; t < 4; ++t) CHECK(sol.policy[t] == direct.policy[t]);
  const auto report = bsk::verify_support_condition(sc, sol, 1e-12);
  CHECK(report.ok);
  CHECK(report.worst_gap <= 1e-12);
}

TEST_CASE("crowd-aversion equilibrium passes the support check") {
  const auto sc = testkit::bundled("crowd");
  FixedPointOptions opts;
  opts.tolerance = 1e-8;
  const auto sol = bsk::solve_bsk_fixed_point(sc, opts);
  REQUIRE(sol.converged);
  CHECK(sol.residual <= 1e-8);
  CHECK(bsk::verify_support_condition(sc, sol, 1e-8).ok);

  // Independent re-pass: best response to the solution's trajectory regenerates it.
  const auto again = bsk::backward_bellman(sc, sol.mean_field);
  const auto m = bsk::forward_kolmogorov(sc, again.policy, sc.m0);
  CHECK(sup_l1_distance(m, sol.mean_field) <= 2e-8);
  // The mean field is exactly the forward image of the policy.
  CHECK(sup_l1_distance(bsk::forward_kolmogorov(sc, sol.policy, sc.m0), sol.mean_field) <= 1e-12);
}

TEST_CASE("overshooting scenario: undamped iteration cycles, damping settles") {
  const auto sc = testkit::bundled("anti");
  FixedPointOptions pure;
  pure.damping = 1.0;
  pure.max_iterations = 100;
  const auto cycling = bsk::solve_bsk_fixed_point(sc, pure);
  CHECK_FALSE(cycling.converged);

  FixedPointOptions damped;
  damped.damping = 0.5;
  const auto sol = bsk::solve_bsk_fixed_point(sc, damped);
  REQUIRE(sol.converged);
  const auto& h = sol.residual_history;
  REQUIRE(h.size() > 4);
  for (std::size_t k = 3; k + 1 < h.size(); ++k) CHECK(h[k + 1] <= h[k]);
  CHECK(bsk::verify_support_condition(sc, sol, 1e-8).ok);
}

TEST_CASE("support check flags a planted dominated action") {
  const auto sc = testkit::table_scenario(KernelMode::DiscreteProbability, {{{1.0}, {1.0}}}, {{0.0, 1.0}}, {0.0},
                                          {1.0}, 1);
  MfeSolution sol;
  sol.mean_field = constant_m0(sc);
  sol.policy.stages = {StagePolicy::pure(sc.space, 0)};
  sol.values = bsk::backward_bellman(sc, sol.mean_field).values;
  const auto bad = bsk::verify_support_condition(sc, sol, 1e-9);
  CHECK_FALSE(bad.ok);
  REQUIRE(bad.witnesses.size() == 1);
  CHECK(bad.witnesses[0].action == 0);
  CHECK(bad.worst_gap == doctest::Approx(1.0));
  CHECK(bsk::verify_support_condition(sc, sol, std::numeric_limits<double>::infinity()).ok);
}

TEST_CASE("a reward shift at one stage lifts earlier values by the shift") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sc = testkit::random_mdp(rng, 3, 2, 5);
    const std::size_t shifted_stage = 2;
    const double c = 0.75;
    auto lifted = sc;
    const auto base = sc.payoff.running;
    lifted.payoff.running = [base, c](double t, std::size_t k, std::size_t x, std::size_t a, const Population& m) {
      return base(t, k, x, a, m) + (t == 2.0 ? c : 0.0);
    };
    const auto a = bsk::backward_bellman(sc, constant_m0(sc));
    const auto b = bsk::backward_bellman(lifted, constant_m0(sc));
    for (std::size_t t = 0; t <= 5; ++t)
      for (std::size_t x = 0; x < 3; ++x)
        CHECK(b.values[t](0, x) == doctest::Approx(a.values[t](0, x) + (t <= shifted_stage ? c : 0.0)).epsilon(1e-13));
    for (std::size_t t = 0; t < 5; ++t) CHECK(a.policy[t] == b.policy[t]);
  }
}

TEST_CASE("scaling rewards keeps the argmax and scales the values") {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sc = testkit::random_mdp(rng, 3, 3, 4);
    auto scaled = sc;
    const auto r = sc.payoff.running;
    const auto g = sc.payoff.terminal;
    scaled.payoff.running = [r](double t, std::size_t k, std::size_t x, std::size_t a, const Population& m) {
      return 4.0 * r(t, k, x, a, m);
    };
    scaled.payoff.terminal = [g](std::size_t k, std::size_t x, const Population& m) { return 4.0 * g(k, x, m); };
    const auto a = bsk::backward_bellman(sc, constant_m0(sc));
    const auto b = bsk::backward_bellman(scaled, constant_m0(sc));
    for (std::size_t t = 0; t < 4; ++t) CHECK(a.policy[t] == b.policy[t]);
    CHECK(b.values[0](0, 1) == doctest::Approx(4.0 * a.values[0](0, 1)));
  }
}

TEST_CASE("softmax smoothing produces mixed policies and is flagged") {
  const auto sc = testkit::bundled("anti");
  FixedPointOptions opts;
  opts.damping = 1.0;
  opts.max_iterations = 60;
  opts.smoothing = SmoothingSchedule{};
  const auto sol = bsk::solve_bsk_fixed_point(sc, opts);
  CHECK(sol.smoothed);
  CHECK(sol.final_temperature == SmoothingSchedule{}.temperature(sol.iterations));
  bool mixed = false;
  for (const auto& stage : sol.policy.stages)
    for (double p : stage.at(0, 0)) mixed |= p > 0.0 && p < 1.0;
  CHECK(mixed);
}

TEST_CASE("fixed-point options are validated") {
  const auto sc = testkit::bundled("crowd");
  FixedPointOptions bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(bsk::solve_bsk_fixed_point(sc, bad), Error);
  bad.damping = 1.5;
  CHECK_THROWS_AS(bsk::solve_bsk_fixed_point(sc, bad), Error);
  bad.damping = 0.5;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(bsk::solve_bsk_fixed_point(sc, bad), Error);
}

TEST_CASE("argmax tie-break") {
  CHECK(tie_broken_argmax(std::vector<double>{1.0, 2.0, 2.0}) == 1);
  CHECK(tie_broken_argmax(std::vector<double>{2.0 + 1e-13, 2.0}) == 0);
  CHECK(tie_broken_argmax(std::vector<double>{2.0, 2.0 + 1e-13}) == 0);
  CHECK(tie_broken_argmax(std::vector<double>{2.0, 2.0 + 1e-9}) == 1);
  CHECK(tie_broken_argmin(std::vector<double>{3.0, 1.0, 1.0}) == 1);
  CHECK_THROWS_AS(tie_broken_argmax(std::vector<double>{}), Error);
}
