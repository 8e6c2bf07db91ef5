#include "serialize.hpp"

#include <cstdio>

#include "mfg/errors.hpp"

namespace mfgcli {

std::string num(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

Csv::Csv(const std::vector<std::string>& header) {
  for (const auto& h : header) cell(h);
  end_row();
}

Csv& Csv::cell(const std::string& value) {
  if (!fresh_row_) text_ += ',';
  text_ += value;
  fresh_row_ = false;
  return *this;
}

Csv& Csv::cell(double value) { return cell(num(value)); }
Csv& Csv::cell(std::size_t value) { return cell(std::to_string(value)); }

void Csv::end_row() {
  text_ += '\n';
  fresh_row_ = true;
}

std::vector<std::string> profile_columns(const mfg::StateSpace& space) {
  std::vector<std::string> cols;
  for (const auto& type : space.types)
    for (const auto& state : space.states)
      cols.push_back(space.type_count() == 1 ? "m_" + state : "m_" + type + "_" + state);
  return cols;
}

void append_profile(Csv& csv, const mfg::Population& m) {
  for (double v : m.flat()) csv.cell(v);
}

std::string trajectory_csv(const mfg::StateSpace& space, const mfg::MeanFieldTrajectory& traj) {
  std::vector<std::string> header{"t"};
  for (auto& c : profile_columns(space)) header.push_back(std::move(c));
  Csv csv(header);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    csv.cell(traj.times[k]);
    append_profile(csv, traj[k]);
    csv.end_row();
  }
  return csv.str();
}

json to_json(const mfg::StateTable& table) {
  json rows = json::array();
  for (std::size_t k = 0; k < table.types(); ++k) {
    const auto row = table.row(k);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

json to_json(const mfg::MeanFieldTrajectory& traj) {
  json points = json::array();
  for (const auto& p : traj.points) points.push_back(to_json(p));
  return {{"times", traj.times}, {"points", points}};
}

json to_json(const mfg::PolicyTrajectory& policy) {
  json stages = json::array();
  for (const auto& stage : policy.stages) {
    json types = json::array();
    for (std::size_t k = 0; k < stage.type_count(); ++k) {
      json states = json::array();
      for (std::size_t x = 0; x < stage.state_count(); ++x) {
        const auto probs = stage.at(k, x);
        states.push_back(std::vector<double>(probs.begin(), probs.end()));
      }
      types.push_back(std::move(states));
    }
    stages.push_back(std::move(types));
  }
  return stages;
}

json to_json(const mfg::ValueTable& values) {
  json out = json::array();
  for (const auto& v : values) out.push_back(to_json(v));
  return out;
}

json to_json(const mfg::LinearFit& fit) {
  return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"slope_std_error", fit.slope_std_error}};
}

json to_json(const mfg::MeanEstimate& estimate) {
  return {{"mean", estimate.mean}, {"std_error", estimate.std_error}, {"count", estimate.count}};
}

json solution_json(const mfg::StateSpace& space, const mfg::MfeSolution& sol) {
  return {{"states", space.states},
          {"types", space.types},
          {"actions", space.actions},
          {"converged", sol.converged},
          {"residual", sol.residual},
          {"iterations", sol.iterations},
          {"residual_history", sol.residual_history},
          {"smoothed", sol.smoothed},
          {"final_temperature", sol.final_temperature},
          {"policy", to_json(sol.policy)},
          {"trajectory", to_json(sol.mean_field)},
          {"values", to_json(sol.values)}};
}

namespace {

void shape_check(bool ok, const std::string& what) {
  if (!ok) mfg::fail(mfg::ErrorCode::ConfigParseError, "solution file: " + what);
}

}  // namespace

mfg::StateTable state_table_from_json(const json& rows) {
  shape_check(rows.is_array(), "expected an array of per-type rows");
  return mfg::StateTable::from_rows(rows.get<std::vector<std::vector<double>>>());
}

mfg::MeanFieldTrajectory trajectory_from_json(const json& doc) {
  shape_check(doc.contains("times") && doc.contains("points"), "trajectory needs times and points");
  mfg::MeanFieldTrajectory traj;
  traj.times = doc.at("times").get<std::vector<double>>();
  for (const auto& p : doc.at("points")) traj.points.push_back(state_table_from_json(p));
  shape_check(traj.times.size() == traj.points.size(), "trajectory times and points differ in length");
  return traj;
}

mfg::PolicyTrajectory policy_from_json(const json& doc, const mfg::StateSpace& space) {
  shape_check(doc.is_array(), "policy must be an array of stages");
  mfg::PolicyTrajectory policy;
  for (const auto& stage : doc) {
    mfg::StagePolicy u(space);
    shape_check(stage.size() == space.type_count(), "policy stage has the wrong number of types");
    for (std::size_t k = 0; k < space.type_count(); ++k) {
      shape_check(stage[k].size() == space.state_count(), "policy stage has the wrong number of states");
      for (std::size_t x = 0; x < space.state_count(); ++x) {
        const auto probs = stage[k][x].get<std::vector<double>>();
        auto slot = u.at(k, x);
        shape_check(probs.size() == slot.size(), "policy row has the wrong number of actions");
        std::copy(probs.begin(), probs.end(), slot.begin());
      }
    }
    mfg::check_policy(space, u);
    policy.stages.push_back(std::move(u));
  }
  return policy;
}

mfg::ValueTable values_from_json(const json& doc) {
  shape_check(doc.is_array(), "values must be an array of stages");
  mfg::ValueTable values;
  for (const auto& v : doc) values.push_back(state_table_from_json(v));
  return values;
}

mfg::ScenarioModel finite_scenario(const mfg::io::ScenarioDocument& doc) {
  if (!doc.scenario) {
    mfg::fail(mfg::ErrorCode::ConfigParseError, doc.source + ": file describes a particle model, not a finite scenario");
  }
  return *doc.scenario;
}

}  // namespace mfgcli
