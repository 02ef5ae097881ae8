#include "flac/flow/kernels.hpp"

#include "flac/errors.hpp"

#include <exception>
#include <vector>

namespace flac::flow {

namespace {

PathwiseBatch pathwise_block(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                             const NoiseDraws& noise, const TerminalFn& terminal, double energy_weight) {
  const BatchTrajectory traj = generate(actor, states, cfg, noise, true);
  const Eigen::MatrixXd s = states.cols() == traj.actions.cols() ? states : states.col(0).replicate(1, traj.actions.cols());
  TerminalTerm term = terminal(s, traj.actions);
  if (term.cotangent.rows() != traj.actions.rows() || term.cotangent.cols() != traj.actions.cols() ||
      term.value.size() != traj.actions.cols())
    throw ShapeError("pathwise kernel: terminal term has the wrong shape");
  PathwiseBatch out;
  out.grads = actor.zeros_like();
  pathwise_backward(traj, cfg, term.cotangent, Eigen::VectorXd::Constant(traj.actions.cols(), energy_weight),
                    out.grads);
  out.energy = traj.energy;
  out.terminal_value = std::move(term.value);
  out.actions = traj.actions;
  return out;
}

Eigen::MatrixXd state_slice(const Eigen::MatrixXd& states, Eigen::Index begin, Eigen::Index count) {
  return states.cols() == 1 ? states : Eigen::MatrixXd(states.middleCols(begin, count));
}

void add_into(nn::Gradients& acc, const nn::Gradients& g) {
  for (std::size_t i = 0; i < acc.layers.size(); ++i) {
    acc.layers[i].weight += g.layers[i].weight;
    acc.layers[i].bias += g.layers[i].bias;
  }
}

// Runs body(c) for every chunk index in parallel; rethrows the first failure.
template <typename Body>
void for_each_chunk(Eigen::Index n_chunks, Body&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_chunks));
#pragma omp parallel for schedule(dynamic, 1)
  for (Eigen::Index c = 0; c < n_chunks; ++c) {
    try {
      body(c);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

PathwiseBatch pathwise_batch_serial(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                                    const NoiseDraws& noise, const TerminalFn& terminal, double energy_weight) {
  return pathwise_block(actor, states, cfg, noise, terminal, energy_weight);
}

PathwiseBatch pathwise_batch_omp(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                                 const NoiseDraws& noise, const TerminalFn& terminal, double energy_weight,
                                 Eigen::Index chunk) {
  if (chunk < 1) throw ConfigError("pathwise kernel: chunk must be positive");
  const Eigen::Index batch = noise.x0.cols();
  const Eigen::Index n_chunks = (batch + chunk - 1) / chunk;
  std::vector<PathwiseBatch> parts(static_cast<std::size_t>(n_chunks));
  for_each_chunk(n_chunks, [&](Eigen::Index c) {
    const Eigen::Index begin = c * chunk;
    const Eigen::Index count = std::min(chunk, batch - begin);
    parts[static_cast<std::size_t>(c)] = pathwise_block(actor, state_slice(states, begin, count), cfg,
                                                        slice_noise(noise, begin, count), terminal, energy_weight);
  });

  PathwiseBatch out;
  out.grads = actor.zeros_like();
  out.energy.resize(batch);
  out.terminal_value.resize(batch);
  out.actions.resize(noise.x0.rows(), batch);
  for (Eigen::Index c = 0; c < n_chunks; ++c) {
    const auto& p = parts[static_cast<std::size_t>(c)];
    const Eigen::Index begin = c * chunk;
    const Eigen::Index count = p.energy.size();
    add_into(out.grads, p.grads);
    out.energy.segment(begin, count) = p.energy;
    out.terminal_value.segment(begin, count) = p.terminal_value;
    out.actions.middleCols(begin, count) = p.actions;
  }
  return out;
}

GenerationBatch generate_batch_serial(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                                      const NoiseDraws& noise) {
  BatchTrajectory t = generate(actor, states, cfg, noise, false);
  return {std::move(t.actions), std::move(t.energy)};
}

GenerationBatch generate_batch_omp(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                                   const NoiseDraws& noise, Eigen::Index chunk) {
  if (chunk < 1) throw ConfigError("generation kernel: chunk must be positive");
  const Eigen::Index batch = noise.x0.cols();
  const Eigen::Index n_chunks = (batch + chunk - 1) / chunk;
  GenerationBatch out;
  out.actions.resize(noise.x0.rows(), batch);
  out.energy.resize(batch);
  for_each_chunk(n_chunks, [&](Eigen::Index c) {
    const Eigen::Index begin = c * chunk;
    const Eigen::Index count = std::min(chunk, batch - begin);
    const BatchTrajectory t =
        generate(actor, state_slice(states, begin, count), cfg, slice_noise(noise, begin, count), false);
    out.actions.middleCols(begin, count) = t.actions;
    out.energy.segment(begin, count) = t.energy;
  });
  return out;
}

}  // namespace flac::flow
