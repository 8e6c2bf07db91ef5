#pragma once

#include "CLI11.hpp"
#include "mfg/equilibrium.hpp"
#include "run_context.hpp"

namespace mfgcli {

struct FixedPointFlags {
  double damping = 0.5;
  double tol = 1e-8;
  std::size_t max_iters = 500;
  bool smooth = false;
  double smooth_temperature = 1.0;
  double smooth_factor = 0.5;
  std::size_t smooth_every = 50;

  /// `tol_flag` names the fixed-point tolerance flag (verbs that use --tol for something else rename it).
  void add_to(CLI::App* verb, const std::string& tol_flag = "--tol") {
    verb->add_option("--damping", damping, "Weight of the new forward pass")->capture_default_str();
    verb->add_option(tol_flag, tol, "Fixed-point tolerance on sup_t |m' - m|_1")->capture_default_str();
    verb->add_option("--max-iters", max_iters, "Fixed-point iteration cap")->capture_default_str();
    verb->add_flag("--smooth", smooth, "Softmax best responses with an annealed temperature");
    verb->add_option("--smooth-temperature", smooth_temperature, "Initial softmax temperature")
        ->capture_default_str();
    verb->add_option("--smooth-factor", smooth_factor, "Temperature factor per period")->capture_default_str();
    verb->add_option("--smooth-every", smooth_every, "Iterations per annealing period")->capture_default_str();
  }

  mfg::FixedPointOptions resolve(RunContext& ctx) const {
    mfg::FixedPointOptions o;
    o.damping = damping;
    o.tolerance = tol;
    o.max_iterations = max_iters;
    json& c = ctx.config();
    c["damping"] = damping;
    c["fixed_point_tol"] = tol;
    c["max_iters"] = max_iters;
    c["smooth"] = smooth;
    if (smooth) {
      o.smoothing = mfg::SmoothingSchedule{smooth_temperature, smooth_factor, smooth_every};
      c["smooth_temperature"] = smooth_temperature;
      c["smooth_factor"] = smooth_factor;
      c["smooth_every"] = smooth_every;
    }
    o.validate();
    return o;
  }
};

}  // namespace mfgcli
