#pragma once

#include "flac/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace flac::env {

struct EnvSpec {
  std::string name;
  int state_dim = 1;
  int action_dim = 1;
  double action_bound = 1.0;  // infinity for an unbounded action space
  int horizon = 1;
  double gamma_hint = 0.99;
};

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool done = false;      // episode over (terminal or horizon reached)
  bool terminal = false;  // true end of the task; no bootstrap past it
};

// Stateful episodic wrapper around pure dynamics.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Eigen::VectorXd& action) = 0;
};

// ---- multi-goal bandit ----

inline constexpr int kNumGoals = 8;
inline constexpr double kGoalRadius = 4.0;

std::array<Eigen::Vector2d, kNumGoals> goal_positions();

// max_k exp(-|a - g_k|^2 / 2); defined on all of R^2.
double multigoal_reward(const Eigen::Vector2d& a);

struct CoverageResult {
  int covered = 0;
  std::array<double, kNumGoals> fraction{};  // share of samples within the capture radius of each goal
};

// Goal k counts as covered when at least f_min of the samples lie within
// capture_radius of it. samples: 2 x n.
CoverageResult mode_coverage(const Eigen::MatrixXd& samples, double capture_radius = 1.0, double f_min = 0.05);

// Single-step bandit with a constant zero state and A = R^2.
class MultiGoalBandit final : public Environment {
 public:
  MultiGoalBandit();
  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;

 private:
  EnvSpec spec_;
};

// ---- point mass ----

inline constexpr double kPointGain = 0.1;
inline constexpr double kPointBound = 5.0;
inline constexpr int kPointHorizon = 200;
inline constexpr double kPointGoalTol = 0.1;

Eigen::Vector2d pointmass_goal();

// Start state uniform on [-bound, bound]^2.
Eigen::Vector2d pointmass_reset(std::uint64_t seed);

// x' = clip(x + 0.1 clip(a), [-5, 5]^2), reward -|x' - goal|. done (and terminal)
// only when x' is within 0.1 of the goal; the horizon is applied by PointMass.
StepResult pointmass_step(const Eigen::Vector2d& state, const Eigen::Vector2d& action);

// Undiscounted return of the zero policy from `start` over a full episode.
double pointmass_zero_policy_return(const Eigen::Vector2d& start, int horizon = kPointHorizon);

class PointMass final : public Environment {
 public:
  PointMass();
  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;

 private:
  EnvSpec spec_;
  Eigen::Vector2d state_ = Eigen::Vector2d::Zero();
  int t_ = 0;
};

std::unique_ptr<Environment> make_environment(std::string_view name);

// ---- finite MDPs ----

struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  Eigen::MatrixXd P;  // (n_states * n_actions) x n_states, row s * n_actions + a
  Eigen::MatrixXd r;  // n_states x n_actions
  Eigen::MatrixXd e;  // per-action generation energy, >= 0
  double gamma = 0.9;

  Eigen::Index row(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions + a; }
  void validate() const;
};

// Rows are normalized exponential draws (flat Dirichlet); r and e uniform on [0, 1].
TabularMDP make_random_mdp(int n_states, int n_actions, std::uint64_t seed, double gamma = 0.9);

}  // namespace flac::env
