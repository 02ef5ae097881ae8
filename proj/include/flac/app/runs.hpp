#pragma once

#include "flac/agent/agent.hpp"
#include "flac/app/config.hpp"
#include "flac/theory/checks.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

namespace flac::app {

struct RunArtifacts {
  std::filesystem::path dir;
  std::filesystem::path config;
  std::filesystem::path metrics;
  std::filesystem::path trace;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::filesystem::path> fields;   // toy and export-field
  std::vector<std::filesystem::path> actions;  // toy action clouds
  std::filesystem::path coverage;              // toy only
  std::vector<std::filesystem::path> extra;    // svg, summaries

  double final_return = 0.0;
  double final_energy = 0.0;
  double final_alpha = 0.0;
  int final_coverage = -1;  // toy only
  int max_coverage = -1;    // best snapshot, toy only

  // Every path above; each exists and is non-empty after a successful run.
  std::vector<std::filesystem::path> files() const;
};

// Called after every environment step with the 1-based step count.
using StepObserver = std::function<void(long step, const agent::StepMetrics&)>;

// `out` itself when stamp is off, else out/<env>_<seed>_<timestamp>.
std::filesystem::path run_directory(const RunConfig& cfg);

// Collect/learn loop with periodic evaluation on the configured environment.
RunArtifacts run_train(const RunConfig& cfg, const StepObserver& observe = {});

// 8-goal bandit: snapshots of fields, action clouds, coverage and the
// (step, E, alpha) trace. With toy_naive the alpha = 0 baseline is trained
// into <dir>/naive and returned second.
std::vector<RunArtifacts> run_toy(const RunConfig& cfg, const StepObserver& observe = {});

struct AblationResult {
  std::filesystem::path summary;  // coefficient,final_return,final_energy,final_alpha
  std::vector<double> coefficients;
  std::vector<RunArtifacts> cells;
};

// One independent run per coefficient with the shared seed.
AblationResult run_ablation(const RunConfig& cfg);

// Prints name,lhs,rhs,relation,tolerance,pass; true iff every check passes.
bool run_check(const RunConfig& cfg, std::ostream& os, std::vector<theory::CheckReport>* reports = nullptr);

// Fields of a checkpointed actor at each configured tau.
RunArtifacts run_export_field(const RunConfig& cfg);

// Mean undiscounted return over eval_episodes with seeds disjoint from training.
double evaluate_policy(agent::Agent& agent, const RunConfig& cfg);

// Quiver of one field grid and the action cloud over the goal ring.
void write_toy_svg(std::ostream& os, const std::vector<flow::FieldRow>& field, const Eigen::MatrixXd& actions);

}  // namespace flac::app
