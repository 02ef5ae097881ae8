#pragma once

#include "flac/nn/mlp.hpp"

#include <cstdint>

namespace flac::nn {

struct AdamState {
  Gradients m;
  Gradients v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState adam_init(const Params& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Bias-corrected Adam. Throws NumericalFault (flat coordinate index) on a
// non-finite gradient before touching any state.
void adam_step(Params& params, const Gradients& grads, AdamState& state, double lr);

}  // namespace flac::nn
