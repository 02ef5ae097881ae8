#include "flac/flow/solver.hpp"

#include "flac/errors.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace flac::flow {

std::string_view to_string(Scheme s) { return s == Scheme::euler ? "euler" : "midpoint"; }

std::string_view to_string(Prior p) { return p == Prior::uniform_box ? "uniform_box" : "standard_gaussian"; }

Scheme scheme_from_string(std::string_view name) {
  if (name == "euler") return Scheme::euler;
  if (name == "midpoint") return Scheme::midpoint;
  throw ConfigError("unknown solver scheme '" + std::string(name) + "'");
}

Prior prior_from_string(std::string_view name) {
  if (name == "uniform_box") return Prior::uniform_box;
  if (name == "standard_gaussian") return Prior::standard_gaussian;
  throw ConfigError("unknown prior '" + std::string(name) + "'");
}

void SolverConfig::validate() const {
  if (n_steps < 1) throw ConfigError("solver: n_steps must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("solver: sigma must be finite and >= 0");
  if (!(action_bound > 0.0)) throw ConfigError("solver: action_bound must be > 0");
  if (prior == Prior::uniform_box && !bounded())
    throw ConfigError("solver: uniform_box prior needs a finite action_bound");
}

NoiseDraws draw_noise(const SolverConfig& cfg, int action_dim, Eigen::Index batch, Rng& rng) {
  cfg.validate();
  NoiseDraws d;
  d.x0.resize(action_dim, batch);
  std::normal_distribution<double> normal(0.0, 1.0);
  if (cfg.prior == Prior::uniform_box) {
    std::uniform_real_distribution<double> unif(-cfg.action_bound, cfg.action_bound);
    for (Eigen::Index c = 0; c < batch; ++c)
      for (int r = 0; r < action_dim; ++r) d.x0(r, c) = unif(rng);
  } else {
    for (Eigen::Index c = 0; c < batch; ++c)
      for (int r = 0; r < action_dim; ++r) d.x0(r, c) = normal(rng);
  }
  if (cfg.sigma > 0.0) {
    d.z.resize(static_cast<std::size_t>(cfg.n_steps));
    for (auto& z : d.z) {
      z.resize(action_dim, batch);
      for (Eigen::Index c = 0; c < batch; ++c)
        for (int r = 0; r < action_dim; ++r) z(r, c) = normal(rng);
    }
  }
  return d;
}

NoiseDraws slice_noise(const NoiseDraws& noise, Eigen::Index begin, Eigen::Index count) {
  NoiseDraws out;
  out.x0 = noise.x0.middleCols(begin, count);
  out.z.reserve(noise.z.size());
  for (const auto& z : noise.z) out.z.push_back(z.middleCols(begin, count));
  return out;
}

double energy_from_drifts(const std::vector<Eigen::MatrixXd>& drifts, Eigen::Index column, double dt) {
  double sum = 0.0;
  for (const auto& u : drifts) {
    double sq = 0.0;
    for (Eigen::Index r = 0; r < u.rows(); ++r) sq += u(r, column) * u(r, column);
    sum += 0.5 * sq;
  }
  return dt * sum;
}

namespace {

void check_finite_drift(const Eigen::MatrixXd& u, int step) {
  if (!u.allFinite()) throw NumericalFault("flow: non-finite drift output", static_cast<std::size_t>(step));
}

}  // namespace

BatchTrajectory generate(const nn::Params& actor, const Eigen::MatrixXd& states, const SolverConfig& cfg,
                         const NoiseDraws& noise, bool record_tape) {
  cfg.validate();
  const Eigen::Index da = noise.x0.rows();
  const Eigen::Index batch = noise.x0.cols();
  const Eigen::Index ds = states.rows();
  if (actor.output_dim() != da || actor.input_dim() != ds + da + 1)
    throw ShapeError("generate: actor expects input " + std::to_string(actor.input_dim()) + " / output " +
                     std::to_string(actor.output_dim()) + ", got state " + std::to_string(ds) + " and action " +
                     std::to_string(da));
  if (states.cols() != batch && states.cols() != 1)
    throw ShapeError("generate: state batch does not match noise batch");
  if (cfg.sigma > 0.0 && noise.z.size() != static_cast<std::size_t>(cfg.n_steps))
    throw ShapeError("generate: missing per-step noise draws");

  const double dt = cfg.dt();
  const double noise_scale = cfg.sigma * std::sqrt(dt);

  BatchTrajectory t;
  t.state_dim = static_cast<int>(ds);
  t.latents.reserve(static_cast<std::size_t>(cfg.n_steps) + 1);
  t.drifts.reserve(static_cast<std::size_t>(cfg.n_steps));
  if (record_tape) t.tapes.resize(static_cast<std::size_t>(cfg.n_steps) * (cfg.scheme == Scheme::midpoint ? 2 : 1));
  t.latents.push_back(noise.x0);

  Eigen::MatrixXd input(ds + da + 1, batch);
  if (states.cols() == batch)
    input.topRows(ds) = states;
  else
    input.topRows(ds) = states.col(0).replicate(1, batch);

  auto eval = [&](const Eigen::MatrixXd& x, double tau, std::size_t tape_index, int step) {
    input.middleRows(ds, da) = x;
    input.row(ds + da).setConstant(tau);
    Eigen::MatrixXd u = nn::forward(actor, input, record_tape ? &t.tapes[tape_index] : nullptr);
    check_finite_drift(u, step);
    return u;
  };

  for (int k = 0; k < cfg.n_steps; ++k) {
    const double tau = k * dt;
    const Eigen::MatrixXd& x = t.latents.back();
    Eigen::MatrixXd u;
    if (cfg.scheme == Scheme::euler) {
      u = eval(x, tau, static_cast<std::size_t>(k), k);
    } else {
      const Eigen::MatrixXd u_start = eval(x, tau, 2 * static_cast<std::size_t>(k), k);
      const Eigen::MatrixXd x_mid = x + (0.5 * dt) * u_start;
      u = eval(x_mid, tau + 0.5 * dt, 2 * static_cast<std::size_t>(k) + 1, k);
    }
    Eigen::MatrixXd next = x + dt * u;
    if (noise_scale > 0.0) next += noise_scale * noise.z[static_cast<std::size_t>(k)];
    t.drifts.push_back(std::move(u));
    t.latents.push_back(std::move(next));
  }

  t.energy.resize(batch);
  for (Eigen::Index c = 0; c < batch; ++c) t.energy[c] = energy_from_drifts(t.drifts, c, dt);
  t.actions = t.latents.back();
  if (cfg.bounded()) t.actions = t.actions.cwiseMax(-cfg.action_bound).cwiseMin(cfg.action_bound);
  return t;
}

void pathwise_backward(const BatchTrajectory& traj, const SolverConfig& cfg, const Eigen::MatrixXd& action_cotangent,
                       const Eigen::VectorXd& energy_weight, nn::Gradients& grads) {
  const std::size_t per_step = cfg.scheme == Scheme::midpoint ? 2 : 1;
  if (traj.tapes.size() != traj.drifts.size() * per_step)
    throw ShapeError("pathwise_backward: trajectory was generated without a tape");
  const Eigen::Index da = traj.actions.rows();
  const Eigen::Index batch = traj.actions.cols();
  if (action_cotangent.rows() != da || action_cotangent.cols() != batch || energy_weight.size() != batch)
    throw ShapeError("pathwise_backward: cotangent / energy weight shape mismatch");

  const double dt = cfg.dt();
  const Eigen::Index ds = traj.state_dim;
  // Straight-through clamp: dL/dX_N = dL/da.
  Eigen::MatrixXd lambda = action_cotangent;
  for (std::size_t k = traj.drifts.size(); k-- > 0;) {
    const Eigen::MatrixXd g_u = dt * (lambda + traj.drifts[k] * energy_weight.asDiagonal());
    if (cfg.scheme == Scheme::euler) {
      const Eigen::MatrixXd g_in = nn::backward_accumulate(traj.tapes[k], g_u, grads);
      lambda += g_in.middleRows(ds, da);
    } else {
      const Eigen::MatrixXd g_mid_in = nn::backward_accumulate(traj.tapes[2 * k + 1], g_u, grads);
      const Eigen::MatrixXd lambda_mid = g_mid_in.middleRows(ds, da);
      const Eigen::MatrixXd g_start_in = nn::backward_accumulate(traj.tapes[2 * k], (0.5 * dt) * lambda_mid, grads);
      lambda += lambda_mid + g_start_in.middleRows(ds, da);
    }
  }
}

namespace {

int action_dim_of(const nn::Params& actor, const Eigen::VectorXd& state) {
  const int da = actor.output_dim();
  if (actor.input_dim() != state.size() + da + 1)
    throw ShapeError("flow: actor input " + std::to_string(actor.input_dim()) + " != d_s + d_a + 1 = " +
                     std::to_string(state.size() + da + 1));
  return da;
}

}  // namespace

Trajectory sample_action(const nn::Params& actor, const Eigen::VectorXd& state, const SolverConfig& cfg,
                         std::uint64_t rng_seed, bool record_tape) {
  const int da = action_dim_of(actor, state);
  Rng rng = make_rng(rng_seed);
  const NoiseDraws noise = draw_noise(cfg, da, 1, rng);
  BatchTrajectory bt = generate(actor, state, cfg, noise, record_tape);

  Trajectory t;
  t.tapes = std::move(bt.tapes);
  t.dt = cfg.dt();
  t.prior = cfg.prior;
  for (const auto& x : bt.latents) t.latents.push_back(x.col(0));
  for (const auto& u : bt.drifts) t.drifts.push_back(u.col(0));
  for (const auto& z : noise.z) t.noise.push_back(z.col(0));
  t.energy = bt.energy[0];
  t.action = bt.actions.col(0);
  return t;
}

double kinetic_energy_estimate(const Trajectory& traj) {
  double sum = 0.0;
  for (const auto& u : traj.drifts) {
    double sq = 0.0;
    for (Eigen::Index r = 0; r < u.size(); ++r) sq += u[r] * u[r];
    sum += 0.5 * sq;
  }
  return traj.dt * sum;
}

double expected_energy(const nn::Params& actor, const Eigen::VectorXd& state, const SolverConfig& cfg, int n_samples,
                       std::uint64_t rng_seed) {
  if (n_samples < 1) throw ConfigError("expected_energy: n_samples must be >= 1");
  const int da = action_dim_of(actor, state);
  Rng rng = make_rng(rng_seed);
  const NoiseDraws noise = draw_noise(cfg, da, n_samples, rng);
  const BatchTrajectory bt = generate(actor, state, cfg, noise, false);
  return bt.energy.mean();
}

nn::Gradients pathwise_grad(const nn::Params& actor, const Eigen::VectorXd& state, const SolverConfig& cfg,
                            std::uint64_t rng_seed, const Eigen::VectorXd& terminal_cotangent, double energy_weight) {
  const int da = action_dim_of(actor, state);
  if (terminal_cotangent.size() != da) throw ShapeError("pathwise_grad: cotangent length must equal action dim");
  Rng rng = make_rng(rng_seed);
  const NoiseDraws noise = draw_noise(cfg, da, 1, rng);
  const BatchTrajectory bt = generate(actor, state, cfg, noise, true);
  nn::Gradients grads = actor.zeros_like();
  pathwise_backward(bt, cfg, terminal_cotangent, Eigen::VectorXd::Constant(1, energy_weight), grads);
  return grads;
}

std::vector<FieldRow> export_field_grid(const nn::Params& actor, const Eigen::VectorXd& state, double tau,
                                        const GridSpec& grid) {
  const int da = action_dim_of(actor, state);
  if (da != 2) throw ConfigError("export_field_grid: needs a 2-D action space");
  if (grid.resolution < 2 || !(grid.max > grid.min)) throw ConfigError("export_field_grid: bad grid spec");
  const int res = grid.resolution;
  const double step = (grid.max - grid.min) / (res - 1);
  const Eigen::Index n = static_cast<Eigen::Index>(res) * res;
  const Eigen::Index ds = state.size();

  Eigen::MatrixXd input(ds + 3, n);
  input.topRows(ds) = state.replicate(1, n);
  for (int j = 0; j < res; ++j) {
    for (int i = 0; i < res; ++i) {
      const Eigen::Index c = static_cast<Eigen::Index>(j) * res + i;
      input(ds, c) = grid.min + i * step;
      input(ds + 1, c) = grid.min + j * step;
    }
  }
  input.row(ds + 2).setConstant(tau);
  const Eigen::MatrixXd u = nn::forward(actor, input);

  std::vector<FieldRow> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) rows.push_back({input(ds, c), input(ds + 1, c), u(0, c), u(1, c)});
  return rows;
}

void write_field_csv(std::ostream& os, const std::vector<FieldRow>& rows) {
  os << "x1,x2,u1,u2\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.x1, r.x2, r.u1, r.u2);
    os << buf;
  }
}

}  // namespace flac::flow
