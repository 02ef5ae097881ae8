#include "flac/nn/mlp.hpp"

#include "flac/errors.hpp"
#include "flac/random.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace flac::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::elu:
      return "elu";
    case Activation::gelu:
      return "gelu";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "elu") return Activation::elu;
  if (name == "gelu") return Activation::gelu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

int Params::input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }

int Params::output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

std::size_t Params::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<int> Params::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(input_dim());
  for (const auto& l : layers) sizes.push_back(static_cast<int>(l.weight.rows()));
  return sizes;
}

Eigen::VectorXd Params::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(num_params()));
  Eigen::Index k = 0;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat[k++] = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat[k++] = l.bias[r];
  }
  return flat;
}

void Params::assign_flat(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_params())
    throw ShapeError("assign_flat: expected " + std::to_string(num_params()) + " values, got " +
                     std::to_string(flat.size()));
  Eigen::Index k = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[k++];
  }
}

Params Params::zeros_like() const {
  Params z = *this;
  z.set_zero();
  return z;
}

void Params::set_zero() {
  for (auto& l : layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

bool Params::same_shape(const Params& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
        layers[i].weight.cols() != other.layers[i].weight.cols())
      return false;
  }
  return true;
}

Params mlp_init(std::span<const int> layer_sizes, Activation hidden, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ConfigError("mlp_init: need at least input and output sizes");
  for (int s : layer_sizes)
    if (s <= 0) throw ConfigError("mlp_init: layer sizes must be positive, got " + std::to_string(s));

  Rng rng = make_rng(seed);
  Params p;
  p.seed = seed;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const int in = layer_sizes[i];
    const int out = layer_sizes[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer l;
    l.weight.resize(out, in);
    // Fill in row-major order so the draw sequence matches flatten().
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = dist(rng);
    l.bias = Eigen::VectorXd::Zero(out);
    l.activation = (i + 2 == layer_sizes.size()) ? Activation::identity : hidden;
    p.layers.push_back(std::move(l));
  }
  return p;
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
// Past this |z| the normal tails drop below the smallest normal double. Subnormal
// activations make every later matrix product several times slower, so they are flushed.
constexpr double kTailCut = 37.5;

}  // namespace

Eigen::MatrixXd normal_cdf(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return v < -kTailCut ? 0.0 : 0.5 * std::erfc(-v * kInvSqrt2); });
}

namespace {

// z * phi(z), zero where it would be subnormal.
auto z_pdf(const Eigen::MatrixXd& z) {
  return kInvSqrt2Pi * (z.array().abs() < kTailCut).cast<double>() * z.array() *
         (-0.5 * z.array().square()).max(-700.0).exp();
}

void activate_inplace(Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::identity:
      return;
    case Activation::elu:
      z.array() = z.array().max(0.0) + (z.array().min(0.0).max(-700.0).exp() - 1.0);
      return;
    case Activation::gelu:
      z.array() *= normal_cdf(z).array();
      return;
  }
}

// dz = dy .* act'(z). `out` is act(z) and `gate` is Phi(z) when the tape kept them.
void apply_derivative(Eigen::MatrixXd& dy, const Eigen::MatrixXd& z, const Eigen::MatrixXd* out,
                      const Eigen::MatrixXd* gate, Activation a) {
  switch (a) {
    case Activation::identity:
      return;
    case Activation::elu:
      if (out != nullptr)
        dy.array() *= out->array().min(0.0) + 1.0;  // elu'(z) = elu(z) + 1 for z <= 0
      else
        dy.array() *= (z.array() > -700.0).cast<double>() * z.array().min(0.0).max(-700.0).exp();
      return;
    case Activation::gelu:
      if (gate != nullptr && gate->size() != 0) {
        dy.array() *= gate->array() + z_pdf(z);
        return;
      }
      dy.array() *= normal_cdf(z).array() + z_pdf(z);
      return;
  }
}

void check_tape(const Tape& tape, const Eigen::MatrixXd& cotangent) {
  if (!tape.complete()) throw ShapeError("backward: tape does not hold a completed forward pass");
  const auto& p = *tape.params;
  if (cotangent.rows() != p.output_dim() || cotangent.cols() != tape.batch())
    throw ShapeError("backward: cotangent is " + std::to_string(cotangent.rows()) + "x" +
                     std::to_string(cotangent.cols()) + ", output is " + std::to_string(p.output_dim()) + "x" +
                     std::to_string(tape.batch()));
}

template <bool kParams>
Eigen::MatrixXd backward_impl(const Tape& tape, const Eigen::MatrixXd& cotangent, Gradients* grads) {
  check_tape(tape, cotangent);
  const auto& p = *tape.params;
  Eigen::MatrixXd delta = cotangent;
  for (std::size_t i = p.layers.size(); i-- > 0;) {
    const Layer& l = p.layers[i];
    const Eigen::MatrixXd* out = i + 1 < tape.inputs.size() ? &tape.inputs[i + 1] : nullptr;
    const Eigen::MatrixXd* gate = i < tape.gates.size() ? &tape.gates[i] : nullptr;
    apply_derivative(delta, tape.preacts[i], out, gate, l.activation);
    if constexpr (kParams) {
      Layer& g = grads->layers[i];
      g.weight.noalias() += delta * tape.inputs[i].transpose();
      g.bias.noalias() += delta.rowwise().sum();
    }
    Eigen::MatrixXd next = l.weight.transpose() * delta;
    delta = std::move(next);
  }
  return delta;
}

}  // namespace

Eigen::MatrixXd forward(const Params& params, const Eigen::MatrixXd& input, Tape* tape) {
  if (params.layers.empty()) throw ShapeError("forward: empty network");
  if (input.rows() != params.input_dim())
    throw ShapeError("forward: input has " + std::to_string(input.rows()) + " rows, network expects " +
                     std::to_string(params.input_dim()));
  if (tape != nullptr) {
    tape->params = nullptr;
    tape->inputs.clear();
    tape->preacts.clear();
    tape->gates.clear();
    tape->inputs.reserve(params.layers.size());
    tape->preacts.reserve(params.layers.size());
  }
  Eigen::MatrixXd h = input;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const Layer& l = params.layers[i];
    Eigen::MatrixXd z = l.weight * h;
    z.colwise() += l.bias;
    if (tape != nullptr) {
      tape->inputs.push_back(std::move(h));
      // elu derivatives are recovered from the next layer's input; identity needs nothing.
      const bool keep = l.activation == Activation::gelu ||
                        (l.activation == Activation::elu && i + 1 == params.layers.size());
      tape->preacts.push_back(keep ? z : Eigen::MatrixXd());
      if (l.activation == Activation::gelu) {
        Eigen::MatrixXd phi = normal_cdf(z);
        z.array() *= phi.array();
        tape->gates.push_back(std::move(phi));
        h = std::move(z);
        continue;
      }
      tape->gates.emplace_back();
    }
    activate_inplace(z, l.activation);
    h = std::move(z);
  }
  if (tape != nullptr) tape->params = &params;
  return h;
}

Eigen::VectorXd mlp_forward(const Params& params, const Eigen::VectorXd& input, Tape* tape) {
  return forward(params, Eigen::MatrixXd(input), tape).col(0);
}

BackwardResult backward(const Tape& tape, const Eigen::MatrixXd& cotangent) {
  check_tape(tape, cotangent);
  BackwardResult out{tape.params->zeros_like(), {}};
  out.input = backward_impl<true>(tape, cotangent, &out.params);
  return out;
}

Eigen::MatrixXd backward_accumulate(const Tape& tape, const Eigen::MatrixXd& cotangent, Gradients& grads) {
  check_tape(tape, cotangent);
  if (!grads.same_shape(*tape.params)) throw ShapeError("backward: gradient store shape mismatch");
  return backward_impl<true>(tape, cotangent, &grads);
}

Eigen::MatrixXd backward_input(const Tape& tape, const Eigen::MatrixXd& cotangent) {
  return backward_impl<false>(tape, cotangent, nullptr);
}

double global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& l : grads.layers) sq += l.weight.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(Gradients& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& l : grads.layers) {
      l.weight *= scale;
      l.bias *= scale;
    }
  }
  return norm;
}

void polyak_update(Params& target, const Params& online, double rho) {
  if (!target.same_shape(online)) throw ShapeError("polyak_update: target and online shapes differ");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("polyak_update: rho must lie in [0, 1]");
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto& t = target.layers[i];
    const auto& o = online.layers[i];
    if (rho == 1.0) {
      t.weight = o.weight;
      t.bias = o.bias;
    } else if (rho != 0.0) {
      // Written as an increment so online == target is an exact fixed point.
      t.weight += rho * (o.weight - t.weight);
      t.bias += rho * (o.bias - t.bias);
    }
  }
}

}  // namespace flac::nn
