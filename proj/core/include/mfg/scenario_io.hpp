#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "mfg/mkv.hpp"
#include "mfg/nplayer.hpp"
#include "mfg/scenario.hpp"

namespace mfg::io {

/// A particle model read from an [mkv] section, with its run defaults.
struct MkvSpec {
  std::string model = "ou";
  mkv::MkvModel particles;
  /// OU parameters when model == "ou".
  double a = 1.0;
  double b = 0.0;
  double s = 1.0;
  std::size_t n = 2000;
  double dt = 1e-3;
  double T = 5.0;
};

struct CsmaSpec {
  nplayer::CsmaParams params;
  std::size_t n = 1000;
  std::size_t slots = 100000;
  std::size_t burn_in = 10000;
};

/// Everything a scenario file can describe. Exactly one of `scenario` (finite
/// state space) or `mkv` is set; CSMA files set both `scenario` and `csma`.
struct ScenarioDocument {
  std::string source;
  std::string name;
  std::optional<ScenarioModel> scenario;
  std::optional<CsmaSpec> csma;
  std::optional<MkvSpec> mkv;
};

/// Throws ConfigParseError with "source:line:column: field: message" for
/// syntax and shape problems; validation failures keep their own codes.
ScenarioDocument parse_scenario(std::string_view text, std::string source = "<string>");
ScenarioDocument load_scenario_file(const std::string& path);

/// A finite-state scenario; ConfigParseError if the file holds a particle model.
ScenarioModel load_scenario(const std::string& path);

}  // namespace mfg::io
