#include "flac/env/environments.hpp"

#include "flac/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace flac::env {

std::array<Eigen::Vector2d, kNumGoals> goal_positions() {
  std::array<Eigen::Vector2d, kNumGoals> g;
  for (int k = 0; k < kNumGoals; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / kNumGoals;
    g[k] = Eigen::Vector2d(kGoalRadius * std::cos(angle), kGoalRadius * std::sin(angle));
  }
  return g;
}

double multigoal_reward(const Eigen::Vector2d& a) {
  static const auto goals = goal_positions();
  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& g : goals) nearest = std::min(nearest, (a - g).squaredNorm());
  return std::exp(-0.5 * nearest);
}

CoverageResult mode_coverage(const Eigen::MatrixXd& samples, double capture_radius, double f_min) {
  if (samples.rows() != 2) throw ShapeError("mode_coverage: samples must be 2 x n");
  if (samples.cols() == 0) throw ConfigError("mode_coverage: no samples");
  if (!(capture_radius > 0.0)) throw ConfigError("mode_coverage: capture_radius must be > 0");
  const auto goals = goal_positions();
  const double r2 = capture_radius * capture_radius;
  CoverageResult out;
  for (int k = 0; k < kNumGoals; ++k) {
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < samples.cols(); ++i)
      if ((samples.col(i) - goals[k]).squaredNorm() <= r2) ++hits;
    out.fraction[k] = static_cast<double>(hits) / static_cast<double>(samples.cols());
    if (out.fraction[k] >= f_min) ++out.covered;
  }
  return out;
}

MultiGoalBandit::MultiGoalBandit() {
  spec_.name = "multigoal";
  spec_.state_dim = 1;
  spec_.action_dim = 2;
  spec_.action_bound = std::numeric_limits<double>::infinity();
  spec_.horizon = 1;
  spec_.gamma_hint = 0.99;
}

Eigen::VectorXd MultiGoalBandit::reset(std::uint64_t) { return Eigen::VectorXd::Zero(1); }

StepResult MultiGoalBandit::step(const Eigen::VectorXd& action) {
  if (action.size() != 2) throw ShapeError("multigoal: action must be 2-D");
  return {Eigen::VectorXd::Zero(1), multigoal_reward(action), true, true};
}

}  // namespace flac::env
