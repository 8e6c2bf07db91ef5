#include <cmath>
#include <random>

#include "builders.hpp"
#include "doctest.h"
#include "mfg/bsk.hpp"
#include "mfg/errors.hpp"
#include "oracles.hpp"

using namespace mfg;

namespace {

MeanFieldTrajectory constant_m0(const ScenarioModel& sc) {
  return MeanFieldTrajectory::constant(sc.m0, sc.horizon.grid());
}

std::vector<std::vector<std::size_t>> pure_actions(const PolicyTrajectory& u, std::size_t states) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& stage : u.stages) {
    std::vector<std::size_t> row(states);
    for (std::size_t x = 0; x < states; ++x) {
      const auto p = stage.at(0, x);
      for (std::size_t a = 0; a < p.size(); ++a)
        if (p[a] == 1.0) row[x] = a;
    }
    out.push_back(row);
  }
  return out;
}

// One decision: start -> {lose, win} with probability 1/2 each, win pays 1 at the end.
ScenarioModel coin_flip() {
  return testkit::table_scenario(KernelMode::DiscreteProbability,
                                 {{{0.0, 0.5, 0.5}}, {{0.0, 1.0, 0.0}}, {{0.0, 0.0, 1.0}}},
                                 {{0.0}, {0.0}, {0.0}}, {0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, 1);
}

}  // namespace

TEST_CASE("coin flip certainty equivalent") {
  const auto sc = coin_flip();
  const double expect = std::log((1.0 + std::exp(1.0)) / 2.0);
  CHECK(expect == doctest::Approx(0.620115).epsilon(1e-6));
  for (bool log_space : {true, false}) {
    const auto res = bsk::risk_sensitive_backward(sc, 1.0, constant_m0(sc), {log_space});
    CHECK(std::abs(res.values[0](0, 0) - expect) <= 1e-14);
  }
  const auto risk_averse = bsk::risk_sensitive_backward(sc, -1.0, constant_m0(sc));
  CHECK(risk_averse.values[0](0, 0) == doctest::Approx(-std::log((1.0 + std::exp(-1.0)) / 2.0)));
}

TEST_CASE("deterministic dynamics make the risk attitude irrelevant") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto sc = testkit::random_mdp(rng, 4, 3, 5);
    // Replace the kernel by a deterministic successor map.
    std::uniform_int_distribution<std::size_t> pick(0, 3);
    testkit::Tensor3 det(4, testkit::Table2(3, std::vector<double>(4, 0.0)));
    for (auto& by_action : det)
      for (auto& row : by_action) row[pick(rng)] = 1.0;
    const auto r = testkit::running_table(sc, sc.m0);
    std::vector<double> g(4);
    for (std::size_t x = 0; x < 4; ++x) g[x] = sc.payoff.terminal(0, x, sc.m0);
    const auto plain = testkit::table_scenario(KernelMode::DiscreteProbability, det, r, g, {0.25, 0.25, 0.25, 0.25}, 5);
    const auto neutral = bsk::backward_bellman(plain, constant_m0(plain));
    for (double mu : {-2.0, -0.3, 0.3, 2.0}) {
      const auto risk = bsk::risk_sensitive_backward(plain, mu, constant_m0(plain));
      for (std::size_t t = 0; t <= 5; ++t)
        for (std::size_t x = 0; x < 4; ++x)
          CHECK(std::abs(risk.values[t](0, x) - neutral.values[t](0, x)) <= 1e-12 * (1.0 + std::abs(neutral.values[t](0, x))));
    }
  }
}

TEST_CASE("small risk parameter recovers mean plus half variance") {
  const auto sc = testkit::bundled("lottery");
  const auto m = constant_m0(sc);
  const auto q = testkit::kernel_tensor(sc, sc.m0);
  const auto r = testkit::running_table(sc, sc.m0);
  std::vector<double> g(2);
  for (std::size_t x = 0; x < 2; ++x) g[x] = sc.payoff.terminal(0, x, sc.m0);

  const double mu = 1e-3;
  const auto res = bsk::risk_sensitive_backward(sc, mu, m);
  const auto moments = oracle::enumerate_paths(q, r, g, pure_actions(res.policy, 2), 0, mu);
  CHECK(std::abs(res.values[0](0, 0) - (moments.mean + mu / 2.0 * moments.variance)) <= 1e-5);

  const auto tiny = bsk::risk_sensitive_backward(sc, 1e-6, m);
  const auto tiny_moments = oracle::enumerate_paths(q, r, g, pure_actions(tiny.policy, 2), 0, 0.0);
  CHECK(std::abs(tiny.values[0](0, 0) - tiny_moments.mean) <= 1e-5);
}

TEST_CASE("risk recursion matches exponential-domain programming on random instances") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sc = testkit::random_mdp(rng, 3, 2, 4);
    const auto q = testkit::kernel_tensor(sc, sc.m0);
    const auto r = testkit::running_table(sc, sc.m0);
    std::vector<double> g(3);
    for (std::size_t x = 0; x < 3; ++x) g[x] = sc.payoff.terminal(0, x, sc.m0);
    for (double mu : {-1.5, -0.2, 0.2, 1.5}) {
      const auto expect = oracle::exp_domain_risk_value(q, r, g, 4, mu);
      const auto res = bsk::risk_sensitive_backward(sc, mu, constant_m0(sc));
      for (std::size_t x = 0; x < 3; ++x) CHECK(std::abs(res.values[0](0, x) - expect[x]) <= 1e-10);
      const auto u = pure_actions(res.policy, 3);
      for (std::size_t x = 0; x < 3; ++x) {
        const auto paths = oracle::enumerate_paths(q, r, g, u, x, mu);
        CHECK(std::abs(paths.certainty_equivalent - res.values[0](0, x)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("library path enumeration agrees with the recursion") {
  const auto sc = testkit::bundled("lottery");
  const auto m = constant_m0(sc);
  for (double mu : {-1.0, 0.5, 2.0}) {
    const auto res = bsk::risk_sensitive_backward(sc, mu, m);
    const auto enumerated = bsk::enumerate_risk_value_oracle(sc, mu, res.policy, m);
    CHECK(std::abs(enumerated.certainty_equivalent(0, 0) - res.values[0](0, 0)) <= 1e-10);
  }
}

TEST_CASE("optimal certainty equivalent is nondecreasing in the risk parameter") {
  const auto sc = testkit::bundled("lottery");
  const auto m = constant_m0(sc);
  double previous = -1e300;
  for (double mu : {-4.0, -1.0, -0.1, -1e-4, 1e-4, 0.1, 1.0, 4.0}) {
    const double v = bsk::risk_sensitive_backward(sc, mu, m).values[0](0, 0);
    CHECK(v >= previous - 1e-12);
    previous = v;
  }
}

TEST_CASE("risk recursion failure modes") {
  const auto sc = testkit::bundled("lottery");
  const auto m = constant_m0(sc);
  CHECK_THROWS_AS(bsk::risk_sensitive_backward(sc, 0.0, m), Error);
  try {
    bsk::risk_sensitive_backward(sc, 800.0, m, {false});
    FAIL("expected overflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Overflow);
  }
  CHECK(std::isfinite(bsk::risk_sensitive_backward(sc, 800.0, m).values[0](0, 0)));

  std::mt19937_64 rng(33);
  const auto big = testkit::random_mdp(rng, 4, 3, 8);
  const auto u = bsk::backward_bellman(big, constant_m0(big)).policy;
  try {
    bsk::enumerate_risk_value_oracle(big, 1.0, u, constant_m0(big));
    FAIL("expected TooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLarge);
  }
}
