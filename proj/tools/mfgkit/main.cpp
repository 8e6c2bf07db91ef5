#include <optional>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfg/errors.hpp"
#include "mfg/stats.hpp"
#include "run_context.hpp"

namespace mfgcli {
namespace {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitInternal = 3;

bool is_path_option(const std::string& name) { return name == "--scenario" || name == "--solution"; }

/// Input paths become absolute so reports and replays do not depend on the working directory.
void absolutize_paths(std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (is_path_option(args[i]) && i + 1 < args.size()) {
      args[i + 1] = fs::absolute(args[i + 1]).lexically_normal().string();
      ++i;
      continue;
    }
    for (const char* name : {"--scenario=", "--solution="}) {
      const std::string prefix = name;
      if (args[i].rfind(prefix, 0) == 0) {
        args[i] = prefix + fs::absolute(args[i].substr(prefix.size())).lexically_normal().string();
      }
    }
  }
}

/// First bare word that is not a global option value.
std::string first_word(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--seed" || args[i] == "--threads" || args[i] == "--out-dir") {
      ++i;
    } else if (args[i].empty() || args[i][0] != '-') {
      return args[i];
    }
  }
  return {};
}

/// The verb's explicitly given options.
std::vector<std::string> explicit_arguments(const CLI::App& verb, json& inputs) {
  std::vector<std::string> out;
  for (const CLI::Option* opt : verb.get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help" || opt->count() == 0) continue;
    if (opt->get_items_expected_max() == 0) {
      if (opt->as<bool>()) out.push_back(name);
      continue;
    }
    std::string value;
    for (const auto& piece : opt->results()) value += (value.empty() ? "" : ",") + piece;
    if (is_path_option(name)) {
      inputs.push_back({{"path", value}, {"sha256", sha256_file(value)}});
    }
    out.push_back(name);
    out.push_back(value);
  }
  return out;
}

std::string status_name(int code) {
  switch (code) {
    case kExitOk: return "ok";
    case kExitNotConverged: return "not_converged";
    case kExitInvalid: return "invalid";
    default: return "internal_error";
  }
}

int dispatch(std::vector<std::string> args);

int replay(const std::string& manifest_path, const std::string* out_dir, std::size_t threads) {
  json manifest;
  try {
    std::ifstream in(manifest_path);
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    std::cerr << "mfgkit: error: ConfigParseError: " << manifest_path << ": " << e.what() << "\n";
    return kExitInvalid;
  }
  for (const char* key : {"command", "arguments", "seed"})
    if (!manifest.contains(key)) {
      std::cerr << "mfgkit: error: ConfigParseError: " << manifest_path << ": missing field '" << key << "'\n";
      return kExitInvalid;
    }
  for (const auto& input : manifest.value("inputs", json::array())) {
    const std::string path = input.at("path");
    if (!fs::exists(path) || sha256_file(path) != input.at("sha256").get<std::string>()) {
      std::cerr << "mfgkit: warning: input " << path << " changed since the manifest was written\n";
    }
  }
  const fs::path target = out_dir ? fs::path(*out_dir) : fs::path(manifest_path).parent_path() / "replay";
  std::vector<std::string> args = {"--seed", std::to_string(manifest["seed"].get<std::uint64_t>()), "--out-dir",
                                   target.string()};
  if (threads > 0) {
    args.push_back("--threads");
    args.push_back(std::to_string(threads));
  }
  for (const auto& word : manifest["command"]) args.push_back(word.get<std::string>());
  for (const auto& word : manifest["arguments"]) args.push_back(word.get<std::string>());
  return dispatch(args);
}

int dispatch(std::vector<std::string> args) {
  CLI::App app{"Solvers and simulators for finite-state mean-field games.", "mfgkit"};
  app.set_version_flag("--version", MFGKIT_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string out_dir = "mfgkit-out";
  bool emit_manifest = true;
  app.add_option("--seed", seed, "Root seed of every random stream")->capture_default_str();
  app.add_option("--threads", threads, "Worker count; 0 means one. Results never depend on it")
      ->envname("MFGKIT_THREADS")
      ->capture_default_str();
  auto* out_opt = app.add_option("--out-dir", out_dir, "Directory for artifacts and manifest.json")->capture_default_str();
  app.add_flag("--emit-manifest,!--no-emit-manifest", emit_manifest, "Write manifest.json (on by default)");

  Registry registry;
  add_dynamics(app, registry);
  add_bsk(app, registry);
  add_mfg(app, registry);
  add_nplayer(app, registry);
  add_mkv(app, registry);
  std::string manifest_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", manifest_path, "manifest.json of an earlier run")
      ->required()
      ->check(CLI::ExistingFile);

  absolutize_paths(args);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const std::string word = first_word(args);
    if (!word.empty() && app.get_subcommand_no_throw(word) == nullptr) {
      std::cerr << "mfgkit: error: " << mfg::to_string(mfg::ErrorCode::UnknownSubcommand) << ": '" << word
                << "'\nRun with --help for more information.\n";
      return kExitInvalid;
    }
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  if (replay_cmd->parsed()) return replay(manifest_path, out_opt->count() > 0 ? &out_dir : nullptr, threads);

  const Command* command = nullptr;
  for (const auto& c : registry)
    if (c.verb->parsed()) command = &c;
  if (command == nullptr) {
    std::cerr << "mfgkit: error: " << mfg::to_string(mfg::ErrorCode::UnknownSubcommand) << "\n";
    return kExitInvalid;
  }
  const std::string group = command->verb->get_parent()->get_name();
  const std::string verb = command->verb->get_name();

  const auto start = std::chrono::steady_clock::now();
  int code = kExitOk;
  std::string message;
  std::optional<RunContext> ctx;
  json inputs = json::array();
  std::vector<std::string> arguments;
  try {
    arguments = explicit_arguments(*command->verb, inputs);
    ctx.emplace(out_dir, seed, mfg::resolve_threads(threads));
    code = command->run(*ctx) == Status::Ok ? kExitOk : kExitNotConverged;
  } catch (const mfg::Error& e) {
    code = kExitInvalid;
    message = e.what();
  } catch (const std::exception& e) {
    code = kExitInternal;
    message = e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!message.empty()) std::cerr << "mfgkit: error: " << message << "\n";

  if (ctx && emit_manifest) {
    try {
      json artifacts = json::array();
      for (const auto& name : ctx->artifacts()) {
        const fs::path path = ctx->out_dir() / name;
        artifacts.push_back({{"file", name}, {"bytes", fs::file_size(path)}, {"sha256", sha256_file(path)}});
      }
      json manifest = {{"tool", "mfgkit"},
                       {"version", MFGKIT_VERSION},
                       {"command", {group, verb}},
                       {"arguments", arguments},
                       {"seed", seed},
                       {"threads", ctx->threads()},
                       {"config", ctx->config()},
                       {"inputs", inputs},
                       {"artifacts", artifacts},
                       {"status", status_name(code)},
                       {"exit_code", code},
                       {"duration_seconds", seconds}};
      if (!message.empty()) manifest["error"] = message;
      std::ofstream out(ctx->out_dir() / "manifest.json", std::ios::trunc);
      out << manifest.dump(2) << "\n";
      if (!out) throw std::runtime_error("cannot write manifest.json");
    } catch (const std::exception& e) {
      std::cerr << "mfgkit: error: " << e.what() << "\n";
      return kExitInternal;
    }
  }
  if (ctx) {
    std::cout << group << " " << verb << ": " << status_name(code) << ", " << ctx->artifacts().size()
              << " artifact(s) in " << ctx->out_dir().string() << "\n";
  }
  return code;
}

}  // namespace
}  // namespace mfgcli

int main(int argc, char** argv) {
  try {
    return mfgcli::dispatch(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const std::exception& e) {
    std::cerr << "mfgkit: internal error: " << e.what() << "\n";
    return 3;
  }
}
