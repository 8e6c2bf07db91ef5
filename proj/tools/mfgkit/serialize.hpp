#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mfg/equilibrium.hpp"
#include "mfg/scenario.hpp"
#include "mfg/scenario_io.hpp"
#include "mfg/stats.hpp"

namespace mfgcli {

using json = nlohmann::json;

/// 17 significant digits, enough to round-trip any double.
std::string num(double value);

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header);

  Csv& cell(double value);
  Csv& cell(std::size_t value);
  Csv& cell(const std::string& value);
  void end_row();

  const std::string& str() const noexcept { return text_; }

 private:
  std::string text_;
  bool fresh_row_ = true;
};

/// m_<state> for one type, m_<type>_<state> otherwise.
std::vector<std::string> profile_columns(const mfg::StateSpace& space);
void append_profile(Csv& csv, const mfg::Population& m);

std::string trajectory_csv(const mfg::StateSpace& space, const mfg::MeanFieldTrajectory& traj);

json to_json(const mfg::StateTable& table);
json to_json(const mfg::MeanFieldTrajectory& traj);
json to_json(const mfg::PolicyTrajectory& policy);
json to_json(const mfg::ValueTable& values);
json to_json(const mfg::LinearFit& fit);
json to_json(const mfg::MeanEstimate& estimate);
json solution_json(const mfg::StateSpace& space, const mfg::MfeSolution& sol);

mfg::StateTable state_table_from_json(const json& rows);
mfg::MeanFieldTrajectory trajectory_from_json(const json& doc);
mfg::PolicyTrajectory policy_from_json(const json& doc, const mfg::StateSpace& space);
mfg::ValueTable values_from_json(const json& doc);

/// The finite-state scenario of a file; ConfigParseError for particle files.
mfg::ScenarioModel finite_scenario(const mfg::io::ScenarioDocument& doc);

}  // namespace mfgcli
