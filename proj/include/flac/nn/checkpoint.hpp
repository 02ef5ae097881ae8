#pragma once

#include "flac/nn/mlp.hpp"

#include <iosfwd>

namespace flac::nn {

// Text container, one token group per line:
//
//   flac-params 1
//   layers <count> <size_0> ... <size_L>
//   activations <tag_1> ... <tag_L>
//   seed <uint64>
//   <value>            one per line, %.17g, layer by layer:
//                      weight row-major (out x in), then bias
//
// Values round-trip exactly through %.17g.
void write_params(std::ostream& os, const Params& params);
Params read_params(std::istream& is);

}  // namespace flac::nn
