#pragma once

#include "flac/agent/agent.hpp"
#include "flac/flow/solver.hpp"
#include "flac/theory/checks.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace flac::app {

enum class Command { toy, train, ablate, check, export_field };

std::string_view to_string(Command c);
Command command_from_string(std::string_view name);

struct RunConfig {
  Command command = Command::train;
  std::string env = "pointmass";
  agent::AgentConfig agent;
  long steps = 100000;
  int eval_interval = 5000;
  int eval_episodes = 10;
  int trace_interval = 100;
  std::filesystem::path out = "runs";
  bool stamp = true;  // append <env>_<seed>_<timestamp> to `out`
  std::uint64_t seed = 0;

  // toy
  bool toy_naive = false;  // also train the alpha = 0 baseline
  int toy_samples = 1000;
  int snapshot_interval = 5000;
  bool svg = true;
  double capture_radius = 1.0;
  double min_fraction = 0.05;

  // ablate
  std::vector<double> grid{0.0, 0.1, 0.5, 2.5};
  std::optional<double> fixed_alpha;

  // check
  theory::GirsanovOptions girsanov;

  // export-field
  std::filesystem::path checkpoint;
  std::vector<double> taus{0.0, 0.5, 1.0};
  flow::GridSpec field_grid;
  std::vector<double> field_state;  // empty = zero state

  void validate() const;
};

// Flat `key = value` text, one key per line, `#` starts a comment.
std::string to_text(const RunConfig& cfg);
bool operator==(const RunConfig& a, const RunConfig& b);

// Defaults, then the environment preset, then the file, then `overrides`
// (each `key=value`). An empty path skips the file. Throws ConfigError naming
// the offending key.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
RunConfig load_config_text(const std::string& text, const std::vector<std::string>& overrides = {});

// Every key load_config accepts.
std::vector<std::string> config_keys();

// FNV-1a of to_text; stored in checkpoints.
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace flac::app
