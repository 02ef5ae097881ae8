#pragma once

// Batched generation kernels. Each has a serial reference that processes the
// whole batch in one pass and an OpenMP version that splits the batch into
// fixed-width column chunks. Chunk results are reduced in chunk order, so the
// OpenMP output does not depend on the thread count; it agrees with the serial
// reference up to floating-point summation order.

#include "flac/flow/solver.hpp"

#include <functional>

namespace flac::flow {

// Terminal objective per column and its gradient w.r.t. the action.
struct TerminalTerm {
  Eigen::MatrixXd cotangent;  // d_a x B
  Eigen::VectorXd value;      // B
};

// Must be safe to call concurrently on disjoint column chunks.
using TerminalFn = std::function<TerminalTerm(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions)>;

struct PathwiseBatch {
  nn::Gradients grads;             // d/dtheta sum_i [ value_i + energy_weight * E_i ]
  Eigen::VectorXd energy;
  Eigen::VectorXd terminal_value;
  Eigen::MatrixXd actions;
};

inline constexpr Eigen::Index kDefaultChunk = 64;

PathwiseBatch pathwise_batch_serial(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                                    const NoiseDraws& noise, const TerminalFn& terminal, double energy_weight);

PathwiseBatch pathwise_batch_omp(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                                 const NoiseDraws& noise, const TerminalFn& terminal, double energy_weight,
                                 Eigen::Index chunk = kDefaultChunk);

// Actions and energies without a tape.
struct GenerationBatch {
  Eigen::MatrixXd actions;
  Eigen::VectorXd energy;
};

GenerationBatch generate_batch_serial(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                                      const NoiseDraws& noise);

GenerationBatch generate_batch_omp(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                                   const NoiseDraws& noise, Eigen::Index chunk = kDefaultChunk);

}  // namespace flac::flow
