#include "flac/nn/checkpoint.hpp"

#include "flac/errors.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>

namespace flac::nn {

namespace {

void expect_token(std::istream& is, const std::string& want) {
  std::string got;
  if (!(is >> got) || got != want) throw ConfigError("checkpoint: expected '" + want + "', got '" + got + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_params(std::ostream& os, const Params& params) {
  const auto sizes = params.layer_sizes();
  os << "flac-params 1\n";
  os << "layers " << sizes.size();
  for (int s : sizes) os << ' ' << s;
  os << "\nactivations";
  for (const auto& l : params.layers) os << ' ' << to_string(l.activation);
  os << "\nseed " << params.seed << '\n';
  const Eigen::VectorXd flat = params.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) os << format_double(flat[i]) << '\n';
}

Params read_params(std::istream& is) {
  expect_token(is, "flac-params");
  int version = 0;
  if (!(is >> version) || version != 1) throw ConfigError("checkpoint: unsupported version");
  expect_token(is, "layers");
  std::size_t count = 0;
  if (!(is >> count) || count < 2) throw ConfigError("checkpoint: bad layer count");
  std::vector<int> sizes(count);
  for (auto& s : sizes)
    if (!(is >> s) || s <= 0) throw ConfigError("checkpoint: bad layer size");
  expect_token(is, "activations");
  Params p;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    std::string tag;
    if (!(is >> tag)) throw ConfigError("checkpoint: missing activation tag");
    Layer l;
    l.weight = Eigen::MatrixXd::Zero(sizes[i + 1], sizes[i]);
    l.bias = Eigen::VectorXd::Zero(sizes[i + 1]);
    l.activation = activation_from_string(tag);
    p.layers.push_back(std::move(l));
  }
  expect_token(is, "seed");
  if (!(is >> p.seed)) throw ConfigError("checkpoint: bad seed");
  Eigen::VectorXd flat(static_cast<Eigen::Index>(p.num_params()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    std::string tok;
    if (!(is >> tok)) throw ConfigError("checkpoint: truncated parameter block");
    char* end = nullptr;
    flat[i] = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ConfigError("checkpoint: bad value '" + tok + "'");
  }
  p.assign_flat(flat);
  return p;
}

}  // namespace flac::nn
