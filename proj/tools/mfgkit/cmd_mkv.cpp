#include <array>
#include <cmath>
#include <algorithm>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "mfg/errors.hpp"
#include "mfg/mkv.hpp"
#include "run_context.hpp"
#include "serialize.hpp"

namespace mfgcli {

namespace {

struct ModelFlags {
  std::string scenario;
  std::optional<std::string> model;
  std::optional<double> a, b, s, c;

  void add_to(CLI::App* verb) {
    verb->add_option("--scenario", scenario, "Scenario file with an [mkv] section")
        ->required()
        ->check(CLI::ExistingFile);
    verb->add_option("--model", model, "ou, pure-drift or custom-table (default: the file's)")
        ->check(CLI::IsMember({"ou", "pure-drift", "custom-table"}));
    verb->add_option("--a", a, "OU mean reversion (default: the file's, else 1)");
    verb->add_option("--b", b, "OU constant drift (default: the file's, else 0)");
    verb->add_option("--s", s, "OU volatility (default: the file's, else 1)");
    verb->add_option("--c", c, "Pure-drift velocity (default 0)");
  }
};

struct ResolvedModel {
  mfg::io::MkvSpec spec;
  mfg::mkv::MkvModel particles;
  /// Set when the limit law is Gaussian with known moments.
  std::optional<std::array<double, 3>> ou;
};

ResolvedModel resolve_model(const ModelFlags& f, RunContext& ctx) {
  const auto doc = mfg::io::load_scenario_file(f.scenario);
  if (!doc.mkv) mfg::fail(mfg::ErrorCode::ConfigParseError, f.scenario + ": no [mkv] section");
  ResolvedModel r{*doc.mkv, doc.mkv->particles, std::nullopt};
  const std::string name = f.model.value_or(r.spec.model);
  const auto& base = r.spec.particles;
  const bool file_ou = r.spec.model == "ou";
  json& cfg = ctx.config();
  cfg["scenario"] = f.scenario;
  cfg["model"] = name;
  if (name == "ou") {
    const double a = f.a.value_or(file_ou ? r.spec.a : 1.0);
    const double b = f.b.value_or(file_ou ? r.spec.b : 0.0);
    const double s = f.s.value_or(file_ou ? r.spec.s : 1.0);
    if (!(a > 0.0)) mfg::fail(mfg::ErrorCode::InvalidArgument, "--a must be > 0");
    r.particles = mfg::mkv::ou_model(a, b, s, base.initial_mean, base.initial_variance);
    if (base.initial_positions.empty()) r.ou = std::array<double, 3>{a, b, s};
    cfg["a"] = a;
    cfg["b"] = b;
    cfg["s"] = s;
  } else if (name == "pure-drift") {
    const double c = f.c.value_or(0.0);
    r.particles = mfg::mkv::pure_drift_model(c, base.initial_mean, base.initial_variance);
    cfg["c"] = c;
  } else if (name != r.spec.model) {
    mfg::fail(mfg::ErrorCode::InvalidArgument, "custom-table coefficients come from the file; " + f.scenario +
                                                   " holds a '" + r.spec.model + "' model");
  }
  r.particles.initial_positions = base.initial_positions;
  cfg["initial_mean"] = base.initial_mean;
  cfg["initial_variance"] = base.initial_variance;
  return r;
}

mfg::mkv::AnalyticCdf limit_law(const ResolvedModel& r, double T) {
  const auto& p = r.particles;
  const auto law = mfg::mkv::ou_oracle((*r.ou)[0], (*r.ou)[1], (*r.ou)[2], p.initial_mean, p.initial_variance, T);
  return mfg::mkv::gaussian_cdf(law.mean, law.variance);
}

std::pair<double, double> moments(const std::vector<double>& x) {
  const double mean = mfg::compensated_sum(x) / static_cast<double>(x.size());
  std::vector<double> sq(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) sq[j] = (x[j] - mean) * (x[j] - mean);
  const double var = x.size() > 1 ? mfg::compensated_sum(sq) / static_cast<double>(x.size() - 1) : 0.0;
  return {mean, var};
}

struct RunOptions {
  ModelFlags model;
  std::optional<std::size_t> n;
  std::optional<double> T;
  std::optional<double> dt;
  std::size_t reps = 1;
  std::size_t snapshots = 10;
};

Status run_run(const RunOptions& o, RunContext& ctx) {
  const auto r = resolve_model(o.model, ctx);
  const std::size_t n = o.n.value_or(r.spec.n);
  const double T = o.T.value_or(r.spec.T);
  const double dt = o.dt.value_or(r.spec.dt);
  const auto steps = static_cast<std::size_t>(std::llround(T / dt));
  const std::size_t stride = std::max<std::size_t>(1, steps / std::max<std::size_t>(1, o.snapshots));
  ctx.config()["n"] = n;
  ctx.config()["T"] = T;
  ctx.config()["dt"] = dt;
  ctx.config()["reps"] = o.reps;
  ctx.config()["snapshots"] = o.snapshots;

  std::vector<mfg::mkv::ParticleEnsemble> runs(o.reps);
  mfg::parallel_for(o.reps, ctx.threads(), [&](std::size_t rep) {
    mfg::mkv::SimOptions options;
    options.record_stride = stride;
    options.replication = rep;
    runs[rep] = mfg::mkv::simulate_particles(r.particles, n, dt, T, ctx.seed(), options);
  });

  Csv particles({"rep", "t", "j", "x"});
  Csv summary({"rep", "t", "mean", "variance"});
  json finals = json::array();
  std::vector<double> w1;
  for (std::size_t rep = 0; rep < runs.size(); ++rep) {
    const auto& run = runs[rep];
    for (std::size_t k = 0; k < run.times.size(); ++k) {
      for (std::size_t j = 0; j < n; ++j) {
        particles.cell(rep).cell(run.times[k]).cell(j).cell(run.positions[k][j]);
        particles.end_row();
      }
      const auto [mean, var] = moments(run.positions[k]);
      summary.cell(rep).cell(run.times[k]).cell(mean).cell(var);
      summary.end_row();
    }
    const auto [mean, var] = moments(run.final_positions());
    json entry = {{"rep", rep}, {"mean", mean}, {"variance", var}};
    if (r.ou) {
      w1.push_back(mfg::mkv::w1_distance(mfg::mkv::empirical_cdf(run.final_positions()), limit_law(r, T)));
      entry["w1_to_limit_law"] = w1.back();
    }
    finals.push_back(std::move(entry));
  }
  ctx.write_text("particles.csv", particles.str());
  ctx.write_text("moments.csv", summary.str());

  json report = {{"final", finals}};
  if (r.ou) {
    const auto& p = r.particles;
    const auto law = mfg::mkv::ou_oracle((*r.ou)[0], (*r.ou)[1], (*r.ou)[2], p.initial_mean, p.initial_variance, T);
    report["limit_law"] = {{"mean", law.mean}, {"variance", law.variance}};
    report["w1_to_limit_law"] = to_json(mfg::estimate_mean(w1));
  }
  ctx.write_json("run.json", report);
  return Status::Ok;
}

struct RateOptions {
  ModelFlags model;
  std::vector<std::size_t> ns;
  std::vector<double> dts;
  std::optional<double> T;
  std::size_t reps = 30;
  std::string reference = "auto";
};

Status run_rate(const RateOptions& o, RunContext& ctx) {
  const auto r = resolve_model(o.model, ctx);
  const double T = o.T.value_or(r.spec.T);
  std::string reference = o.reference;
  if (reference == "auto") reference = r.ou ? "analytic" : "fine-grid";
  if (reference == "analytic" && !r.ou) {
    mfg::fail(mfg::ErrorCode::InvalidArgument, "no analytic limit law for this model; use --reference fine-grid");
  }
  ctx.config()["ns"] = o.ns;
  ctx.config()["dts"] = o.dts;
  ctx.config()["T"] = T;
  ctx.config()["reps"] = o.reps;
  ctx.config()["reference"] = reference;

  mfg::mkv::RateReference ref;
  if (reference == "analytic") ref.analytic = limit_law(r, T);
  const auto report = mfg::mkv::rate_study(r.particles, o.ns, o.dts, T, o.reps, ctx.seed(), ref, ctx.threads());

  Csv csv({"sweep", "n", "dt", "mean", "std_error", "count"});
  auto cells = [&csv](const char* sweep, const std::vector<mfg::mkv::RateCell>& list) {
    json out = json::array();
    for (const auto& c : list) {
      csv.cell(std::string(sweep)).cell(c.n).cell(c.dt).cell(c.error.mean).cell(c.error.std_error).cell(c.error.count);
      csv.end_row();
      out.push_back({{"n", c.n}, {"dt", c.dt}, {"error", to_json(c.error)}});
    }
    return out;
  };
  const json by_n = cells("n", report.by_n);
  const json by_dt = cells("dt", report.by_dt);
  ctx.write_text("rate.csv", csv.str());
  ctx.write_json("rate.json", {{"reference", report.reference},
                               {"by_n", by_n},
                               {"by_dt", by_dt},
                               {"n_fit", to_json(report.n_fit)},
                               {"dt_fit", to_json(report.dt_fit)}});
  return Status::Ok;
}

}  // namespace

void add_mkv(CLI::App& root, Registry& registry) {
  auto* group = root.add_subcommand("mkv", "Interacting particle systems of McKean-Vlasov type");
  group->require_subcommand(1);

  auto run = std::make_shared<RunOptions>();
  auto* run_cmd = group->add_subcommand("run", "Simulate particles; writes snapshots (t, j, x) and moments");
  run->model.add_to(run_cmd);
  run_cmd->add_option("--n", run->n, "Particles (default: the file's)");
  run_cmd->add_option("--T", run->T, "Horizon (default: the file's)");
  run_cmd->add_option("--dt", run->dt, "Euler step (default: the file's)");
  run_cmd->add_option("--reps", run->reps, "Replications")->check(CLI::PositiveNumber)->capture_default_str();
  run_cmd->add_option("--snapshots", run->snapshots, "Recorded times besides t = 0")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  registry.push_back({run_cmd, [run](RunContext& ctx) { return run_run(*run, ctx); }});

  auto rate = std::make_shared<RateOptions>();
  auto* rate_cmd = group->add_subcommand("rate", "W1 error at T against n and against dt, with log-log fits");
  rate->model.add_to(rate_cmd);
  rate_cmd->add_option("--ns", rate->ns, "Comma-separated particle counts")->required()->delimiter(',');
  rate_cmd->add_option("--dts", rate->dts, "Comma-separated time steps")->required()->delimiter(',');
  rate_cmd->add_option("--T", rate->T, "Horizon (default: the file's)");
  rate_cmd->add_option("--reps", rate->reps, "Replications per cell")->capture_default_str();
  rate_cmd->add_option("--reference", rate->reference, "auto, analytic or fine-grid")
      ->check(CLI::IsMember({"auto", "analytic", "fine-grid"}))
      ->capture_default_str();
  registry.push_back({rate_cmd, [rate](RunContext& ctx) { return run_rate(*rate, ctx); }});
}

}  // namespace mfgcli
