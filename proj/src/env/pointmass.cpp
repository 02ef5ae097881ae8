#include "flac/env/environments.hpp"

#include "flac/errors.hpp"

#include <memory>
#include <string>

namespace flac::env {

Eigen::Vector2d pointmass_goal() { return Eigen::Vector2d(3.0, 3.0); }

Eigen::Vector2d pointmass_reset(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x504d);
  std::uniform_real_distribution<double> unif(-kPointBound, kPointBound);
  const double x = unif(rng);
  const double y = unif(rng);
  return Eigen::Vector2d(x, y);
}

StepResult pointmass_step(const Eigen::Vector2d& state, const Eigen::Vector2d& action) {
  const Eigen::Vector2d a = action.cwiseMax(-1.0).cwiseMin(1.0);
  const Eigen::Vector2d next = (state + kPointGain * a).cwiseMax(-kPointBound).cwiseMin(kPointBound);
  const double dist = (next - pointmass_goal()).norm();
  const bool reached = dist <= kPointGoalTol + 1e-12;
  return {next, -dist, reached, reached};
}

double pointmass_zero_policy_return(const Eigen::Vector2d& start, int horizon) {
  const double dist = (start - pointmass_goal()).norm();
  if (dist <= kPointGoalTol + 1e-12) return -dist;
  return -dist * horizon;
}

PointMass::PointMass() {
  spec_.name = "pointmass";
  spec_.state_dim = 2;
  spec_.action_dim = 2;
  spec_.action_bound = 1.0;
  spec_.horizon = kPointHorizon;
  spec_.gamma_hint = 0.99;
}

Eigen::VectorXd PointMass::reset(std::uint64_t seed) {
  state_ = pointmass_reset(seed);
  t_ = 0;
  return state_;
}

StepResult PointMass::step(const Eigen::VectorXd& action) {
  if (action.size() != 2) throw ShapeError("pointmass: action must be 2-D");
  StepResult res = pointmass_step(state_, action);
  state_ = res.next_state;
  ++t_;
  if (t_ >= spec_.horizon) res.done = true;
  return res;
}

std::unique_ptr<Environment> make_environment(std::string_view name) {
  if (name == "multigoal") return std::make_unique<MultiGoalBandit>();
  if (name == "pointmass") return std::make_unique<PointMass>();
  throw ConfigError("unknown environment '" + std::string(name) + "'");
}

}  // namespace flac::env
