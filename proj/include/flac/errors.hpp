#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flac {

// Invalid user or programmer supplied configuration (bad sizes, out-of-range
// hyperparameters, unknown config keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/vector dimensions that do not chain.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A NaN or infinity showed up where a finite value is required. `index` names
// the offending coordinate or solver step, depending on the raising site.
class NumericalFault : public std::runtime_error {
 public:
  NumericalFault(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"),
        index_(index) {}

  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Replay buffer holds fewer items than requested.
class NotReady : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A check was asked to run outside its domain (e.g. path KL at sigma = 0).
class NotApplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flac
