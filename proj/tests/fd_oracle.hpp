#pragma once

// Test-only central-difference oracle. It only calls the scalar objective, so
// it stays independent of any tape / backward code it is used to check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace flac::testing {

inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                 Eigen::Index coord, double h) {
  const double x0 = x[coord];
  x[coord] = x0 + h;
  const double fp = f(x);
  x[coord] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

inline double directional_difference(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& dir, double h) {
  return (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
}

// |a - b| / max(|a|, |b|, floor)
inline double relative_error(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline std::vector<Eigen::Index> random_coordinates(Eigen::Index n, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<Eigen::Index> out(static_cast<std::size_t>(count));
  for (auto& c : out) c = pick(rng);
  return out;
}

}  // namespace flac::testing
