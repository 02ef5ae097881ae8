#include "flac/agent/replay.hpp"

#include "flac/errors.hpp"

#include <cmath>
#include <string>

namespace flac::agent {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), ds_(state_dim), da_(action_dim) {
  if (capacity == 0) throw ConfigError("replay buffer: capacity must be positive");
  if (state_dim < 1 || action_dim < 1) throw ConfigError("replay buffer: dimensions must be positive");
  const auto cap = static_cast<Eigen::Index>(capacity);
  s_.resize(ds_, cap);
  a_.resize(da_, cap);
  s2_.resize(ds_, cap);
  r_.resize(cap);
  done_.resize(cap);
}

namespace {

void require_finite(const Eigen::VectorXd& v, const char* field, std::size_t offset) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) throw NumericalFault(std::string("replay buffer: non-finite ") + field, offset + i);
}

}  // namespace

void ReplayBuffer::push(const Transition& t) {
  if (t.s.size() != ds_ || t.s2.size() != ds_ || t.a.size() != da_)
    throw ShapeError("replay buffer: transition dimensions");
  require_finite(t.s, "state", 0);
  require_finite(t.a, "action", 0);
  if (!std::isfinite(t.r)) throw NumericalFault("replay buffer: non-finite reward", 0);
  require_finite(t.s2, "next state", 0);
  const auto c = static_cast<Eigen::Index>(cursor_);
  s_.col(c) = t.s;
  a_.col(c) = t.a;
  s2_.col(c) = t.s2;
  r_[c] = t.r;
  done_[c] = t.done ? 1.0 : 0.0;
  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
  ++pushed_;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay buffer: index");
  const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
  const auto c = static_cast<Eigen::Index>((oldest + i) % capacity_);
  return {s_.col(c), a_.col(c), r_[c], s2_.col(c), done_[c] != 0.0};
}

Batch ReplayBuffer::sample(int batch, Rng& rng) const {
  if (batch < 1) throw ConfigError("replay buffer: batch must be positive");
  if (size_ < static_cast<std::size_t>(batch))
    throw NotReady("replay buffer: holds " + std::to_string(size_) + " of " + std::to_string(batch) + " items");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  Batch b;
  b.s.resize(ds_, batch);
  b.a.resize(da_, batch);
  b.s2.resize(ds_, batch);
  b.r.resize(batch);
  b.done.resize(batch);
  for (int j = 0; j < batch; ++j) {
    const auto c = static_cast<Eigen::Index>(pick(rng));
    b.s.col(j) = s_.col(c);
    b.a.col(j) = a_.col(c);
    b.s2.col(j) = s2_.col(c);
    b.r[j] = r_[c];
    b.done[j] = done_[c];
  }
  return b;
}

Batch ReplayBuffer::sample(int batch, std::uint64_t seed) const {
  Rng rng = make_rng(seed, 0x5250);
  return sample(batch, rng);
}

}  // namespace flac::agent
