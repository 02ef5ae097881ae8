#include "flac/nn/adam.hpp"

#include "flac/errors.hpp"

#include <cmath>

namespace flac::nn {

AdamState adam_init(const Params& params, double beta1, double beta2, double eps) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

namespace {

void check_finite(const Gradients& grads) {
  std::size_t offset = 0;
  for (const auto& l : grads.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        if (!std::isfinite(l.weight(r, c)))
          throw NumericalFault("adam_step: non-finite gradient", offset + static_cast<std::size_t>(r * l.weight.cols() + c));
    offset += static_cast<std::size_t>(l.weight.size());
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      if (!std::isfinite(l.bias[r])) throw NumericalFault("adam_step: non-finite gradient", offset + static_cast<std::size_t>(r));
    offset += static_cast<std::size_t>(l.bias.size());
  }
}

template <typename P, typename G>
void update_block(P& p, const G& g, P& m, P& v, double b1, double b2, double step_size, double eps_hat) {
  m.array() = b1 * m.array() + (1.0 - b1) * g.array();
  v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
  p.array() -= step_size * m.array() / (v.array().sqrt() + eps_hat);
}

}  // namespace

void adam_step(Params& params, const Gradients& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
  if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v))
    throw ShapeError("adam_step: params, gradients and moments must share a shape");
  check_finite(grads);

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  // lr * mhat / (sqrt(vhat) + eps) rewritten on the raw moments.
  const double step_size = lr * std::sqrt(bc2) / bc1;
  const double eps_hat = state.eps * std::sqrt(bc2);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update_block(params.layers[i].weight, grads.layers[i].weight, state.m.layers[i].weight, state.v.layers[i].weight,
                 state.beta1, state.beta2, step_size, eps_hat);
    update_block(params.layers[i].bias, grads.layers[i].bias, state.m.layers[i].bias, state.v.layers[i].bias,
                 state.beta1, state.beta2, step_size, eps_hat);
  }
}

}  // namespace flac::nn
