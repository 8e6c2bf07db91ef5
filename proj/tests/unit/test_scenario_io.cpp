#include <string>

#include "builders.hpp"
#include "doctest.h"
#include "mfg/errors.hpp"
#include "mfg/nplayer.hpp"
#include "mfg/scenario_io.hpp"

using namespace mfg;

namespace {

const char* kTwoState = R"(
name = "two"
[space]
states = ["a", "b"]
actions = ["stay", "go"]
[horizon]
mode = "discrete"
stages = 3
[m0]
values = [0.25, 0.75]
[payoff]
family = "table"
running = [[0.0, 1.0], [2.0, 3.0]]
terminal = [5.0, 6.0]
[kernel]
family = "table"
q = [[[1.0, 0.0], [0.0, 1.0]],
     [[0.0, 1.0], [1.0, 0.0]]]
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::string parse_error(const std::string& text) {
  try {
    io::parse_scenario(text, "case.toml");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigParseError);
    return e.what();
  }
  FAIL("expected a parse error");
  return {};
}

}  // namespace

TEST_CASE("table scenario round trip") {
  const auto doc = io::parse_scenario(kTwoState);
  REQUIRE(doc.scenario);
  const auto& sc = *doc.scenario;
  CHECK(sc.name == "two");
  CHECK(sc.horizon.stages == 3);
  CHECK(sc.m0 == testkit::single({0.25, 0.75}));
  CHECK(sc.payoff.running(0.0, 0, 1, 0, sc.m0) == 2.0);
  CHECK(sc.payoff.terminal(0, 1, sc.m0) == 6.0);
  const auto q = testkit::kernel_tensor(sc, sc.m0);
  CHECK(q[1][1] == std::vector<double>{1.0, 0.0});
  CHECK(sc.space.actions[0][0] == std::vector<std::string>{"stay", "go"});
}

TEST_CASE("diagnostics carry source, position and field") {
  const auto ragged = parse_error(replace(kTwoState, "[0.0, 1.0], [2.0, 3.0]", "[0.0, 1.0], [2.0]"));
  CHECK(ragged.find("case.toml:") != std::string::npos);
  CHECK(ragged.find("payoff.running") != std::string::npos);
  CHECK(ragged.find("ragged") != std::string::npos);

  const auto mode = parse_error(replace(kTwoState, "\"discrete\"", "\"sideways\""));
  CHECK(mode.find("case.toml:7:") != std::string::npos);
  CHECK(mode.find("horizon.mode") != std::string::npos);

  CHECK(parse_error(replace(kTwoState, "family = \"table\"\nq", "family = \"magic\"\nq")).find("kernel.family") !=
        std::string::npos);
  CHECK(parse_error(replace(kTwoState, "stages = 3", "stages = -1")).find("horizon.stages") != std::string::npos);
  CHECK(parse_error(replace(kTwoState, "values = [0.25, 0.75]", "values = [0.25, 0.5, 0.25]")).find("m0.values") !=
        std::string::npos);
  CHECK(parse_error(replace(kTwoState, "[m0]", "[m0")).find("case.toml:") != std::string::npos);
  CHECK(parse_error(replace(kTwoState, "[horizon]\nmode = \"discrete\"\nstages = 3\n", "")).find("horizon") !=
        std::string::npos);
  CHECK(parse_error(replace(kTwoState, "running = [[0.0, 1.0], [2.0, 3.0]]", "running = [[0.0, 1.0, 4.0], [2.0, 3.0, 4.0]]"))
            .find("axis") != std::string::npos);
}

TEST_CASE("semantic errors surface with their own codes") {
  try {
    io::parse_scenario(replace(kTwoState, "[0.0, 1.0], [1.0, 0.0]]", "[0.0, 1.0], [1.0, 0.5]]"));
    FAIL("expected KernelNotStochastic");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::KernelNotStochastic);
  }
  try {
    io::parse_scenario(replace(kTwoState, "values = [0.25, 0.75]", "values = [0.5, 0.75]"));
    FAIL("expected InvalidDistribution");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidDistribution);
  }
}

TEST_CASE("multi-type scenario with a type axis") {
  const char* text = R"(
[space]
states = ["a", "b"]
types = ["slow", "fast"]
[horizon]
mode = "continuous"
T = 1.0
dt = 0.01
[m0]
slow = [1.0, 0.0]
fast = [0.5, 0.5]
type_shares = [0.25, 0.75]
[payoff]
family = "pairwise"
pairwise = [[[[1.0, 0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0, 2.0]]],
            [[[0.0, 0.0, 3.0, 0.0]], [[0.0, 0.0, 0.0, 0.0]]]]
[kernel]
family = "table"
q = [[[[-1.0, 1.0]], [[0.0, 0.0]]],
     [[[-2.0, 2.0]], [[3.0, -3.0]]]]
)";
  const auto sc = *io::parse_scenario(text).scenario;
  CHECK(sc.space.type_count() == 2);
  CHECK(sc.type_shares == std::vector<double>{0.25, 0.75});
  CHECK(sc.m0(1, 1) == 0.5);
  // slow/a earns the slow/a mass; fast/a earns the fast/a mass (flat index 2).
  CHECK(sc.payoff.running(0.0, 0, 0, 0, sc.m0) == 1.0);
  CHECK(sc.payoff.running(0.0, 1, 0, 0, sc.m0) == 1.5);
  std::vector<double> row(2);
  sc.kernel.row(0.0, 1, 1, 0, sc.m0, row);
  CHECK(row == std::vector<double>{3.0, -3.0});
  CHECK(parse_error(replace(text, "fast = [0.5, 0.5]", "")).find("fast") != std::string::npos);
}

TEST_CASE("state-dependent action sets") {
  const char* text = R"(
[space]
states = ["x", "y"]
[space.actions_by_state]
x = ["left", "right"]
y = ["wait"]
[horizon]
mode = "discrete"
stages = 1
[m0]
values = [1.0, 0.0]
[payoff]
family = "table"
running = [[0.0, 1.0], [0.0, 0.0]]
[kernel]
family = "table"
q = [[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [0.0, 1.0]]]
)";
  CHECK(parse_error(text).find("same number of actions") != std::string::npos);
}

TEST_CASE("every bundled file loads") {
  for (const auto& name : testkit::finite_bundled_names()) {
    CAPTURE(name);
    const auto sc = io::load_scenario(testkit::scenario_path(name));
    CHECK(sc.name == name);
  }
  const auto rps = testkit::bundled("rps");
  REQUIRE(rps.revision);
  CHECK(rps.revision->protocol == "replicator");
  CHECK(rps.revision->mutation == 0.01);
}

TEST_CASE("CSMA section") {
  const auto doc = io::load_scenario_file(testkit::scenario_path("csma"));
  REQUIRE(doc.csma);
  CHECK(doc.csma->params.max_backoff == std::vector<std::size_t>{2});
  CHECK(doc.csma->params.attempt == std::vector<std::vector<double>>{{1.0, 0.5, 0.25}});
  CHECK(doc.csma->n == 1000);
  CHECK(doc.csma->slots == 100000);
  CHECK(doc.csma->burn_in == 10000);
  REQUIRE(doc.scenario);
  CHECK(doc.scenario->space.state_count() == 3);
}

TEST_CASE("particle model section") {
  const auto doc = io::load_scenario_file(testkit::scenario_path("ou"));
  REQUIRE(doc.mkv);
  CHECK_FALSE(doc.scenario);
  CHECK(doc.mkv->model == "ou");
  CHECK(doc.mkv->a > 0.0);
  try {
    io::load_scenario(testkit::scenario_path("ou"));
    FAIL("expected ConfigParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigParseError);
  }
  const auto custom = io::parse_scenario(R"(
[mkv]
model = "custom-table"
drift = [1.0, -2.0, 0.5]
volatility = [0.0, 0.0, 0.0]
initial_positions = [0.0, 1.0]
n = 2
dt = 0.5
T = 1.0
)");
  REQUIRE(custom.mkv);
  CHECK(custom.mkv->particles.drift(0.0, 1.0, 0.0, 2.0) == 0.0);
  CHECK(custom.mkv->particles.initial_positions.size() == 2);
  CHECK(parse_error("[mkv]\nmodel = \"ou\"\na = -1.0\ns = 1.0\n").find("mkv.a") != std::string::npos);
  CHECK(parse_error("[mkv]\nmodel = \"levy\"\n").find("mkv.model") != std::string::npos);
}

TEST_CASE("missing files are configuration errors") {
  try {
    io::load_scenario("/nonexistent/scenario.toml");
    FAIL("expected ConfigParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigParseError);
  }
}
