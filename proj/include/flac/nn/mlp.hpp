#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace flac::nn {

enum class Activation { elu, gelu, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::identity;
};

// Dense feed-forward stack. Samples are columns: a batch input is in x B.
struct Params {
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  int input_dim() const;
  int output_dim() const;
  std::size_t num_params() const;
  std::vector<int> layer_sizes() const;

  // Row-major weights then bias, layer by layer.
  Eigen::VectorXd flatten() const;
  void assign_flat(const Eigen::VectorXd& flat);

  // Same shapes and activations, all values zero.
  Params zeros_like() const;
  void set_zero();
  bool same_shape(const Params& other) const;
};

// Parameter-shaped gradient store.
using Gradients = Params;

// `hidden` is applied after every layer except the last, which is identity.
// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
Params mlp_init(std::span<const int> layer_sizes, Activation hidden, std::uint64_t seed);

// Values cached by one forward pass; consumed by backward().
struct Tape {
  const Params* params = nullptr;
  std::vector<Eigen::MatrixXd> inputs;   // per layer, in x B
  std::vector<Eigen::MatrixXd> preacts;  // per layer, out x B; empty where the backward pass does not need it
  std::vector<Eigen::MatrixXd> gates;    // gelu layers: Phi(z); empty elsewhere

  bool complete() const { return params != nullptr && inputs.size() == params->layers.size(); }
  Eigen::Index batch() const { return inputs.empty() ? 0 : inputs.front().cols(); }
};

// Standard normal CDF, elementwise; the gelu gate.
Eigen::MatrixXd normal_cdf(const Eigen::MatrixXd& z);

Eigen::MatrixXd forward(const Params& params, const Eigen::MatrixXd& input, Tape* tape = nullptr);
Eigen::VectorXd mlp_forward(const Params& params, const Eigen::VectorXd& input, Tape* tape = nullptr);

struct BackwardResult {
  Gradients params;
  Eigen::MatrixXd input;  // in x B
};

// Gradients of sum(cotangent .* output) w.r.t. every parameter and the input.
BackwardResult backward(const Tape& tape, const Eigen::MatrixXd& cotangent);

// Adds parameter gradients into `grads` and returns the input cotangent.
Eigen::MatrixXd backward_accumulate(const Tape& tape, const Eigen::MatrixXd& cotangent, Gradients& grads);

// Input cotangent only; parameter gradients are not formed.
Eigen::MatrixXd backward_input(const Tape& tape, const Eigen::MatrixXd& cotangent);

double global_norm(const Gradients& grads);

// Rescales so the global L2 norm is at most max_norm. Returns the norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

// target <- rho * online + (1 - rho) * target
void polyak_update(Params& target, const Params& online, double rho);

}  // namespace flac::nn
