#pragma once

#include "flac/nn/mlp.hpp"
#include "flac/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

namespace flac::flow {

enum class Scheme { euler, midpoint };
enum class Prior { uniform_box, standard_gaussian };

std::string_view to_string(Scheme s);
std::string_view to_string(Prior p);
Scheme scheme_from_string(std::string_view name);
Prior prior_from_string(std::string_view name);

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct SolverConfig {
  int n_steps = 2;                      // NFE-relevant step count N
  Scheme scheme = Scheme::midpoint;
  double sigma = 0.0;                   // diffusion scale; 0 = deterministic flow
  Prior prior = Prior::uniform_box;
  double action_bound = 1.0;            // half-width of the action box; kUnbounded disables clamping

  double dt() const { return 1.0 / static_cast<double>(n_steps); }
  bool bounded() const { return action_bound != kUnbounded; }
  void validate() const;
};

// Frozen randomness of a batch of generations. Columns are samples.
struct NoiseDraws {
  Eigen::MatrixXd x0;             // action_dim x B
  std::vector<Eigen::MatrixXd> z; // n_steps of action_dim x B; empty when sigma == 0
};

// Column-major draw order: X0 for every column, then z step by step.
NoiseDraws draw_noise(const SolverConfig& cfg, int action_dim, Eigen::Index batch, Rng& rng);

// Restricts draws to columns [begin, begin + count).
NoiseDraws slice_noise(const NoiseDraws& noise, Eigen::Index begin, Eigen::Index count);

// One batch of generations X_0 .. X_N.
struct BatchTrajectory {
  std::vector<Eigen::MatrixXd> latents;  // n_steps + 1, unclamped
  std::vector<Eigen::MatrixXd> drifts;   // n_steps, the evaluations that advance the state
  Eigen::VectorXd energy;                // per column: dt * sum_k 0.5 |u_k|^2
  Eigen::MatrixXd actions;               // X_N clamped to the action box
  // Populated when recorded. Euler: one tape per step. Midpoint: two per step
  // (start evaluation, then the advancing midpoint evaluation).
  std::vector<nn::Tape> tapes;
  int state_dim = 0;
};

// Integrates dX = u(s, tau, X) dtau + sigma dW from X_0 for every column of `states`
// (state_dim x B, or state_dim x 1 broadcast to the noise batch).
BatchTrajectory generate(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                         const NoiseDraws& noise, bool record_tape);

// Adds d/dtheta sum_i [ cot_i . a_i + w_i * E_i ] into `grads`, with X_0 and noise
// frozen. The clamp passes gradients straight through.
void pathwise_backward(const BatchTrajectory& traj, const SolverConfig& cfg, const Eigen::MatrixXd& action_cotangent,
                       const Eigen::VectorXd& energy_weight, nn::Gradients& grads);

// dt * sum_k 0.5 |u_k|^2 for one column, accumulated in a fixed scalar order.
double energy_from_drifts(const std::vector<Eigen::MatrixXd>& drifts, Eigen::Index column, double dt);

// Single generation, the unit the rest of the library reasons about.
struct Trajectory {
  std::vector<Eigen::VectorXd> latents;  // X_0 .. X_N, unclamped
  std::vector<Eigen::VectorXd> drifts;   // u_k per step
  std::vector<Eigen::VectorXd> noise;    // z_k per step; empty when sigma == 0
  double energy = 0.0;
  Eigen::VectorXd action;
  double dt = 0.0;
  Prior prior = Prior::uniform_box;
  std::vector<nn::Tape> tapes;  // recorded drift evaluations (record_tape); they reference the actor
};

// Actor input is [s; x; tau], so actor.input_dim() == d_s + d_a + 1.
Trajectory sample_action(const nn::Params& actor, const Eigen::VectorXd& state, const SolverConfig& cfg,
                         std::uint64_t rng_seed, bool record_tape = false);

double kinetic_energy_estimate(const Trajectory& traj);

// Monte Carlo mean of the kinetic energy over independent prior / noise draws.
double expected_energy(const nn::Params& actor, const Eigen::VectorXd& state, const SolverConfig& cfg, int n_samples,
                       std::uint64_t rng_seed);

// d/dtheta [ cot . a + energy_weight * E ] for the generation fixed by rng_seed.
nn::Gradients pathwise_grad(const nn::Params& actor, const Eigen::VectorXd& state, const SolverConfig& cfg,
                            std::uint64_t rng_seed, const Eigen::VectorXd& terminal_cotangent, double energy_weight);

struct GridSpec {
  double min = -6.0;
  double max = 6.0;
  int resolution = 20;
};

struct FieldRow {
  double x1, x2, u1, u2;
};

// Drift u(s, tau, x) on a resolution x resolution grid; x2 outer, x1 inner.
std::vector<FieldRow> export_field_grid(const nn::Params& actor, const Eigen::VectorXd& state, double tau,
                                        const GridSpec& grid);

// Header `x1,x2,u1,u2`, 17 significant digits.
void write_field_csv(std::ostream& os, const std::vector<FieldRow>& rows);

}  // namespace flac::flow
