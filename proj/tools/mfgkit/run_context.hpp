#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace CLI {
class App;
}

namespace mfgcli {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum class Status { Ok, NotConverged };

/// Output directory, seed and worker count of one command, plus the artifacts it wrote.
class RunContext {
 public:
  RunContext(fs::path out_dir, std::uint64_t seed, std::size_t threads);

  const fs::path& out_dir() const noexcept { return out_dir_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t threads() const noexcept { return threads_; }

  /// Resolved configuration, copied into the manifest and into JSON reports.
  json& config() noexcept { return config_; }
  const json& config() const noexcept { return config_; }

  void write_text(const std::string& name, const std::string& text);
  /// Adds "seed" and "config" to object documents before writing.
  void write_json(const std::string& name, json doc);

  const std::vector<std::string>& artifacts() const noexcept { return artifacts_; }

 private:
  fs::path out_dir_;
  std::uint64_t seed_;
  std::size_t threads_;
  json config_ = json::object();
  std::vector<std::string> artifacts_;
};

std::string sha256_file(const fs::path& path);

struct Command {
  CLI::App* verb = nullptr;
  std::function<Status(RunContext&)> run;
};

using Registry = std::vector<Command>;

void add_dynamics(CLI::App& root, Registry& registry);
void add_bsk(CLI::App& root, Registry& registry);
void add_mfg(CLI::App& root, Registry& registry);
void add_nplayer(CLI::App& root, Registry& registry);
void add_mkv(CLI::App& root, Registry& registry);

}  // namespace mfgcli
