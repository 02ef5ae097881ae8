#pragma once

#include "flac/random.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>

namespace flac::agent {

inline constexpr std::size_t kDefaultCapacity = 1'000'000;

struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd s2;
  bool done = false;  // no bootstrap from s2
};

// Columns are transitions.
struct Batch {
  Eigen::MatrixXd s, a, s2;
  Eigen::VectorXd r;
  Eigen::VectorXd done;  // 1.0 or 0.0

  Eigen::Index size() const { return r.size(); }
};

// Fixed-capacity FIFO ring. Storage is column-major so sampled batches are
// gathered without per-item allocation.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

  void push(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_pushed() const { return pushed_; }

  // i-th stored transition, oldest first.
  Transition at(std::size_t i) const;

  // Uniform with replacement.
  Batch sample(int batch, Rng& rng) const;
  Batch sample(int batch, std::uint64_t seed) const;

 private:
  std::size_t capacity_;
  int ds_, da_;
  Eigen::MatrixXd s_, a_, s2_;
  Eigen::VectorXd r_, done_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  std::size_t pushed_ = 0;
};

}  // namespace flac::agent
