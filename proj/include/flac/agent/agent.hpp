#pragma once

#include "flac/agent/replay.hpp"
#include "flac/flow/kernels.hpp"
#include "flac/nn/adam.hpp"
#include "flac/nn/mlp.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace flac::agent {

// E_tgt = C * dim(A).
double target_energy(int action_dim, double coeff);

inline constexpr double kLogAlphaLimit = 700.0;

struct AgentConfig {
  int batch_size = 256;
  std::size_t buffer_capacity = kDefaultCapacity;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;  // beta of the log-alpha update
  double gamma = 0.99;
  double energy_coeff = 0.5;  // C
  int warmup_steps = 5000;
  double polyak = 0.005;
  int updates_per_step = 1;
  double grad_clip = 10.0;
  bool auto_tune = true;
  // Initial alpha when auto-tuning (must be > 0); the fixed alpha otherwise
  // (0 gives the naive flow).
  double alpha = 1.0;
  int hidden_width = 512;
  int actor_layers = 2;
  int critic_layers = 3;
  nn::Activation actor_activation = nn::Activation::elu;
  nn::Activation critic_activation = nn::Activation::gelu;
  flow::SolverConfig solver;
  std::uint64_t seed = 0;
  bool parallel = true;  // OpenMP kernels for the batched passes

  void validate() const;
};

enum class ActMode { explore, eval };

struct StepMetrics {
  bool collecting = true;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double log_alpha = 0.0;
  double mean_energy = 0.0;
};

struct ActorStep {
  double loss = 0.0;
  double mean_energy = 0.0;  // batch mean of E measured before the step
};

class Agent {
 public:
  Agent(const AgentConfig& cfg, int state_dim, int action_dim);

  const AgentConfig& config() const { return cfg_; }
  int state_dim() const { return ds_; }
  int action_dim() const { return da_; }
  double target_energy() const { return e_tgt_; }
  double log_alpha() const { return log_alpha_; }
  double alpha() const;
  void set_log_alpha(double v);

  // y = r + gamma (1 - done) (min_i Qbar_i(s', a') - alpha E(s')), a' and E(s')
  // from one fresh generation per row.
  Eigen::VectorXd critic_target(const Batch& batch);
  // Regresses both critics toward y; returns the pre-step loss
  // 0.5 (mse_1 + mse_2).
  double critic_update(const Batch& batch, const Eigen::VectorXd& y);
  double critic_update(const Batch& batch);
  // One pathwise step on mean(alpha E - Q_1(s, a)).
  ActorStep actor_update(const Batch& batch);
  // log alpha += beta (mean E - E_tgt) when auto-tuning; returns the new log alpha.
  double alpha_update(double mean_energy);
  void update_targets();

  // Collecting until warmup_steps transitions were pushed, then
  // critic, actor, alpha, targets.
  StepMetrics train_step(const ReplayBuffer& buffer);

  Eigen::VectorXd act(const Eigen::VectorXd& state, ActMode mode);
  // Generation of many actions at one state from the eval stream (2 x n for the toy).
  flow::GenerationBatch sample_many(const Eigen::VectorXd& state, int n, ActMode mode);
  void reset_eval_stream(std::uint64_t seed);

  double q1(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;

  nn::Params actor, critic1, critic2, target1, target2;
  nn::AdamState actor_opt, critic1_opt, critic2_opt;

 private:
  Eigen::MatrixXd critic_input(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) const;
  flow::GenerationBatch run_generation(const Eigen::MatrixXd& states, const flow::NoiseDraws& noise) const;

  AgentConfig cfg_;
  int ds_, da_;
  double e_tgt_;
  double log_alpha_ = 0.0;
  Rng train_rng_, explore_rng_, eval_rng_;
};

// Text checkpoint: every Params block, log alpha and a hash of the config.
void save_checkpoint(std::ostream& os, const Agent& agent, std::uint64_t config_hash);
// Restores parameters and log alpha; throws ConfigError on a hash or shape mismatch.
void load_checkpoint(std::istream& is, Agent& agent, std::uint64_t config_hash);
// Reads only the actor block.
nn::Params read_checkpoint_actor(std::istream& is);

}  // namespace flac::agent
