#include <doctest.h>

#include "fd_oracle.hpp"
#include "flac/errors.hpp"
#include "flac/flow/kernels.hpp"
#include "flac/flow/solver.hpp"

#include <omp.h>

#include <cmath>
#include <sstream>

using namespace flac;
using namespace flac::flow;

namespace {

// Hidden layer is random; last layer has zero weights so the output is its bias.
nn::Params constant_actor(int ds, const Eigen::VectorXd& c, std::uint64_t seed = 3) {
  const int da = static_cast<int>(c.size());
  nn::Params p = nn::mlp_init(std::vector<int>{ds + da + 1, 8, da}, nn::Activation::elu, seed);
  p.layers.back().weight.setZero();
  p.layers.back().bias = c;
  return p;
}

// u(s, x, tau) = -x for a 1-D action.
nn::Params negative_identity_actor(int ds) {
  nn::Params p;
  nn::Layer l;
  l.weight = Eigen::MatrixXd::Zero(1, ds + 2);
  l.weight(0, ds) = -1.0;
  l.bias = Eigen::VectorXd::Zero(1);
  p.layers.push_back(l);
  return p;
}

SolverConfig config(Scheme scheme, int n, double sigma, Prior prior, double bound) {
  SolverConfig c;
  c.scheme = scheme;
  c.n_steps = n;
  c.sigma = sigma;
  c.prior = prior;
  c.action_bound = bound;
  return c;
}

}  // namespace

TEST_CASE("default solver config") {
  const SolverConfig c;
  CHECK(c.n_steps == 2);
  CHECK(c.scheme == Scheme::midpoint);
  CHECK(c.sigma == 0.0);
  CHECK(c.dt() * c.n_steps == 1.0);
  CHECK_THROWS_AS(config(Scheme::euler, 0, 0, Prior::uniform_box, 1).validate(), ConfigError);
  CHECK_THROWS_AS(config(Scheme::euler, 2, -1, Prior::uniform_box, 1).validate(), ConfigError);
  CHECK_THROWS_AS(config(Scheme::euler, 2, 0, Prior::uniform_box, kUnbounded).validate(), ConfigError);
}

TEST_CASE("zero field: action is the clamped prior draw, energy zero") {
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(3, 0.4);
  const nn::Params actor = constant_actor(3, Eigen::Vector2d::Zero());
  for (auto prior : {Prior::uniform_box, Prior::standard_gaussian}) {
    const SolverConfig cfg = config(Scheme::midpoint, 2, 0.0, prior, 0.5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Trajectory t = sample_action(actor, s, cfg, seed);
      CHECK(t.energy == 0.0);
      const Eigen::VectorXd expected = t.latents.front().cwiseMax(-0.5).cwiseMin(0.5);
      CHECK((t.action.array() == expected.array()).all());
      CHECK(t.noise.empty());
    }
  }
}

TEST_CASE("constant field transports by c with energy |c|^2 / 2") {
  const Eigen::Vector2d c(0.7, -1.3);
  const nn::Params actor = constant_actor(1, c);
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
  for (auto scheme : {Scheme::euler, Scheme::midpoint}) {
    for (int n : {1, 2, 7, 24}) {
      const SolverConfig cfg = config(scheme, n, 0.0, Prior::standard_gaussian, kUnbounded);
      const Trajectory t = sample_action(actor, s, cfg, 42);
      CHECK((t.latents.back() - (t.latents.front() + c)).norm() < 1e-12);
      CHECK(t.energy == doctest::Approx(0.5 * c.squaredNorm()).epsilon(1e-12));
      CHECK(t.latents.size() == static_cast<std::size_t>(n + 1));
      CHECK(t.drifts.size() == static_cast<std::size_t>(n));
    }
  }
}

TEST_CASE("energy identity is bit-exact and X_N is stored unclamped") {
  const nn::Params actor = nn::mlp_init(std::vector<int>{2 + 3 + 1, 16, 16, 3}, nn::Activation::elu, 9);
  const Eigen::Vector2d s(0.3, -0.2);
  for (auto scheme : {Scheme::euler, Scheme::midpoint}) {
    for (double sigma : {0.0, 0.8}) {
      const SolverConfig cfg = config(scheme, 5, sigma, Prior::uniform_box, 0.2);
      for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const Trajectory t = sample_action(actor, s, cfg, seed);
        CHECK(kinetic_energy_estimate(t) == t.energy);
        const Eigen::VectorXd clamped = t.latents.back().cwiseMax(-0.2).cwiseMin(0.2);
        CHECK((t.action.array() == clamped.array()).all());
        CHECK(t.noise.size() == (sigma > 0 ? 5u : 0u));
      }
    }
  }
}

TEST_CASE("deterministic replay") {
  const nn::Params actor = nn::mlp_init(std::vector<int>{1 + 2 + 1, 16, 2}, nn::Activation::elu, 4);
  const SolverConfig cfg = config(Scheme::midpoint, 3, 0.5, Prior::standard_gaussian, kUnbounded);
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(1, 0.1);
  const Trajectory a = sample_action(actor, s, cfg, 77);
  const Trajectory b = sample_action(actor, s, cfg, 77);
  for (std::size_t k = 0; k < a.latents.size(); ++k) CHECK((a.latents[k].array() == b.latents[k].array()).all());
  CHECK(a.energy == b.energy);
  const Trajectory c = sample_action(actor, s, cfg, 78);
  CHECK(c.latents.front() != a.latents.front());
}

TEST_CASE("sample_action with a tape records every drift evaluation") {
  const nn::Params actor = nn::mlp_init(std::vector<int>{1 + 2 + 1, 8, 2}, nn::Activation::elu, 4);
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
  CHECK(sample_action(actor, s, config(Scheme::midpoint, 3, 0, Prior::standard_gaussian, kUnbounded), 1, true)
            .tapes.size() == 6);
  CHECK(sample_action(actor, s, config(Scheme::euler, 3, 0, Prior::standard_gaussian, kUnbounded), 1, true)
            .tapes.size() == 3);
  CHECK(sample_action(actor, s, config(Scheme::euler, 3, 0, Prior::standard_gaussian, kUnbounded), 1).tapes.empty());
}

TEST_CASE("kinetic_energy_estimate arithmetic") {
  Trajectory t;
  t.dt = 0.5;
  t.drifts = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  CHECK(kinetic_energy_estimate(t) == 0.0);

  // Unit-speed straight line over [0, 1].
  Trajectory unit;
  unit.dt = 1.0 / 8;
  unit.drifts.assign(8, Eigen::VectorXd::Constant(1, 1.0));
  CHECK(kinetic_energy_estimate(unit) == 0.5);

  Trajectory two;
  two.dt = 0.5;
  two.drifts = {Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 2.0)};
  CHECK(kinetic_energy_estimate(two) == 1.25);
}

TEST_CASE("non-finite drift names the step") {
  nn::Params actor = constant_actor(1, Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN()));
  const SolverConfig cfg = config(Scheme::euler, 4, 0.0, Prior::standard_gaussian, kUnbounded);
  try {
    sample_action(actor, Eigen::VectorXd::Zero(1), cfg, 0);
    FAIL("expected NumericalFault");
  } catch (const NumericalFault& e) {
    CHECK(e.index() == 0);
  }

  // u = 1e300 * x overflows on the second evaluation.
  nn::Params blow = negative_identity_actor(1);
  blow.layers[0].weight(0, 1) = 1e300;
  blow.layers[0].bias[0] = 1.0;
  try {
    sample_action(blow, Eigen::VectorXd::Zero(1), cfg, 0);
    FAIL("expected NumericalFault");
  } catch (const NumericalFault& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("expected_energy") {
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
  const SolverConfig gauss = config(Scheme::midpoint, 2, 0.0, Prior::standard_gaussian, kUnbounded);
  CHECK(expected_energy(constant_actor(1, Eigen::Vector2d::Zero()), s, gauss, 1, 5) == 0.0);
  CHECK(expected_energy(constant_actor(1, Eigen::Vector2d::Zero()), s, gauss, 300, 5) == 0.0);
  const Eigen::Vector2d c(1.5, 0.5);
  CHECK(expected_energy(constant_actor(1, c), s, gauss, 200, 5) == doctest::Approx(0.5 * c.squaredNorm()).epsilon(1e-12));
  CHECK_THROWS_AS(expected_energy(constant_actor(1, c), s, gauss, 0, 5), ConfigError);
}

TEST_CASE("expected_energy for u = -x matches the Gaussian closed form") {
  // X_tau = X_0 exp(-tau), so E[int_0^1 X_tau^2 / 2] = (1 - e^-2) / 4 for X_0 ~ N(0, 1).
  const double exact = (1.0 - std::exp(-2.0)) / 4.0;
  const nn::Params actor = negative_identity_actor(1);
  const SolverConfig cfg = config(Scheme::euler, 64, 0.0, Prior::standard_gaussian, kUnbounded);
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
  const int n = 4000;

  Rng rng = make_rng(123);
  const NoiseDraws noise = draw_noise(cfg, 1, n, rng);
  const Eigen::VectorXd e = generate_batch_serial(actor, s, cfg, noise).energy;
  const double mean = e.mean();
  const double se = std::sqrt((e.array() - mean).square().sum() / (n - 1) / n);
  CHECK(expected_energy(actor, s, cfg, n, 123) == doctest::Approx(mean).epsilon(1e-14));
  CHECK(std::abs(mean - exact) < 3.0 * se);
}

TEST_CASE("scheme consistency as N grows") {
  const nn::Params actor = nn::mlp_init(std::vector<int>{1 + 2 + 1, 16, 16, 2}, nn::Activation::elu, 8);
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(1, 0.2);
  auto gap = [&](int n) {
    const Trajectory e = sample_action(actor, s, config(Scheme::euler, n, 0, Prior::uniform_box, 1.0), 5);
    const Trajectory m = sample_action(actor, s, config(Scheme::midpoint, n, 0, Prior::uniform_box, 1.0), 5);
    return (e.latents.back() - m.latents.back()).norm() + std::abs(e.energy - m.energy);
  };
  const double coarse = gap(4);
  const double fine = gap(512);
  CHECK(fine < coarse);
  CHECK(fine < 2e-3);
}

TEST_CASE("pathwise_grad: zero objective gives zero gradient") {
  const nn::Params actor = nn::mlp_init(std::vector<int>{2 + 2 + 1, 16, 16, 2}, nn::Activation::elu, 1);
  const nn::Gradients g =
      pathwise_grad(actor, Eigen::Vector2d(0.1, 0.2), SolverConfig{}, 3, Eigen::Vector2d::Zero(), 0.0);
  CHECK(g.flatten().isZero(0.0));
}

TEST_CASE("pathwise_grad: energy gradient of a constant-output actor") {
  const Eigen::Vector2d c(0.6, -0.9);
  const nn::Params actor = constant_actor(1, c);
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
  for (auto scheme : {Scheme::euler, Scheme::midpoint}) {
    const SolverConfig cfg = config(scheme, 3, 0.0, Prior::uniform_box, 1.0);
    const nn::Gradients g = pathwise_grad(actor, s, cfg, 11, Eigen::Vector2d::Zero(), 1.0);
    // E = dt * sum_k |b|^2 / 2 with every drift equal to the final bias b: dE/db = b.
    CHECK((g.layers.back().bias - c).norm() < 1e-12);
    auto energy = [&](const Eigen::VectorXd& theta) {
      nn::Params q = actor;
      q.assign_flat(theta);
      return sample_action(q, s, cfg, 11).energy;
    };
    const Eigen::VectorXd theta = actor.flatten();
    const Eigen::VectorXd analytic = g.flatten();
    for (Eigen::Index k = theta.size() - 2; k < theta.size(); ++k)
      CHECK(flac::testing::relative_error(analytic[k], flac::testing::central_difference(energy, theta, k, 1e-5)) <
            1e-3);
  }
}

TEST_CASE("pathwise_grad matches central differences on the full objective") {
  const nn::Params actor = nn::mlp_init(std::vector<int>{2 + 2 + 1, 24, 24, 2}, nn::Activation::elu, 17);
  const Eigen::Vector2d s(0.5, -0.3);
  const Eigen::Vector2d cot(0.8, -1.1);
  const double w = 0.7;
  for (auto scheme : {Scheme::euler, Scheme::midpoint}) {
    for (double sigma : {0.0, 0.5}) {
      // Wide box so no sample touches the clamp.
      const SolverConfig cfg = config(scheme, 2, sigma, Prior::uniform_box, 1.0);
      SolverConfig no_clamp = cfg;
      no_clamp.action_bound = 50.0;
      const std::uint64_t seed = 5;
      const nn::Gradients g = pathwise_grad(actor, s, no_clamp, seed, cot, w);
      auto objective = [&](const Eigen::VectorXd& theta) {
        nn::Params q = actor;
        q.assign_flat(theta);
        // Same X_0 as the uniform_box prior on [-1, 1]: draw with cfg, run unclamped.
        Rng rng = make_rng(seed);
        const NoiseDraws noise = draw_noise(cfg, 2, 1, rng);
        const BatchTrajectory t = generate(q, s, no_clamp, noise, false);
        return cot.dot(t.actions.col(0)) + w * t.energy[0];
      };
      // pathwise_grad with no_clamp draws X_0 on [-50, 50]; recompute the analytic side on cfg's draws.
      Rng rng = make_rng(seed);
      const NoiseDraws noise = draw_noise(cfg, 2, 1, rng);
      const BatchTrajectory t = generate(actor, s, no_clamp, noise, true);
      nn::Gradients ga = actor.zeros_like();
      pathwise_backward(t, no_clamp, cot, Eigen::VectorXd::Constant(1, w), ga);
      CHECK(ga.num_params() == g.num_params());

      const Eigen::VectorXd theta = actor.flatten();
      const Eigen::VectorXd analytic = ga.flatten();
      double worst = 0.0;
      for (Eigen::Index k : flac::testing::random_coordinates(theta.size(), 20, 99))
        worst = std::max(worst, flac::testing::relative_error(
                                    analytic[k], flac::testing::central_difference(objective, theta, k, 1e-5), 1e-6));
      CHECK(worst < 1e-3);
    }
  }
}

TEST_CASE("OpenMP pathwise kernel agrees with the serial reference") {
  const nn::Params actor = nn::mlp_init(std::vector<int>{3 + 2 + 1, 32, 32, 2}, nn::Activation::elu, 2);
  const nn::Params critic = nn::mlp_init(std::vector<int>{3 + 2, 32, 32, 1}, nn::Activation::gelu, 3);
  const SolverConfig cfg = config(Scheme::midpoint, 2, 0.3, Prior::uniform_box, 1.0);
  const Eigen::Index batch = 150;
  Rng rng = make_rng(4);
  Eigen::MatrixXd states = Eigen::MatrixXd::Random(3, batch);
  const NoiseDraws noise = draw_noise(cfg, 2, batch, rng);
  const TerminalFn terminal = [&](const Eigen::MatrixXd& st, const Eigen::MatrixXd& a) {
    Eigen::MatrixXd in(5, a.cols());
    in << st, a;
    nn::Tape tape;
    const Eigen::MatrixXd q = nn::forward(critic, in, &tape);
    const Eigen::MatrixXd g = nn::backward_input(tape, Eigen::MatrixXd::Constant(1, a.cols(), -1.0));
    return TerminalTerm{g.bottomRows(2), -q.row(0).transpose()};
  };
  const PathwiseBatch ref = pathwise_batch_serial(actor, states, cfg, noise, terminal, 0.4);
  omp_set_num_threads(1);
  const PathwiseBatch one = pathwise_batch_omp(actor, states, cfg, noise, terminal, 0.4, 32);
  omp_set_num_threads(4);
  const PathwiseBatch four = pathwise_batch_omp(actor, states, cfg, noise, terminal, 0.4, 32);

  const Eigen::VectorXd gr = ref.grads.flatten();
  CHECK((one.grads.flatten() - gr).norm() <= 1e-10 * gr.norm());
  CHECK((one.grads.flatten().array() == four.grads.flatten().array()).all());
  CHECK((one.energy - ref.energy).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((one.actions - ref.actions).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((one.terminal_value - ref.terminal_value).cwiseAbs().maxCoeff() < 1e-12);

  const GenerationBatch gs = generate_batch_serial(actor, states, cfg, noise);
  const GenerationBatch go = generate_batch_omp(actor, states, cfg, noise, 16);
  CHECK((gs.energy - go.energy).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((gs.actions - ref.actions).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("export_field_grid") {
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
  const GridSpec grid{-6.0, 6.0, 20};
  const auto zero = export_field_grid(constant_actor(1, Eigen::Vector2d::Zero()), s, 0.5, grid);
  CHECK(zero.size() == 400);
  for (const auto& r : zero) CHECK((r.u1 == 0.0 && r.u2 == 0.0));

  const auto cst = export_field_grid(constant_actor(1, Eigen::Vector2d(1.5, -2.0)), s, 0.0, grid);
  for (const auto& r : cst) CHECK((r.u1 == 1.5 && r.u2 == -2.0));
  CHECK(cst.front().x1 == -6.0);
  CHECK(cst.front().x2 == -6.0);
  CHECK(cst[1].x1 > cst[0].x1);
  CHECK(cst.back().x1 == doctest::Approx(6.0));

  std::ostringstream os;
  write_field_csv(os, cst);
  CHECK(os.str().rfind("x1,x2,u1,u2\n", 0) == 0);

  const nn::Params three = constant_actor(1, Eigen::Vector3d::Zero());
  CHECK_THROWS_AS(export_field_grid(three, s, 0.0, grid), ConfigError);
}
