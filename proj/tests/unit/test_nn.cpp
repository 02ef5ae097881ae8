#include <doctest.h>

#include "fd_oracle.hpp"
#include "flac/errors.hpp"
#include "flac/nn/adam.hpp"
#include "flac/nn/checkpoint.hpp"
#include "flac/nn/mlp.hpp"

#include <cmath>
#include <sstream>

using namespace flac;
using namespace flac::nn;

namespace {

Params single_affine(double w, double b) {
  Params p;
  Layer l;
  l.weight = Eigen::MatrixXd::Constant(1, 1, w);
  l.bias = Eigen::VectorXd::Constant(1, b);
  p.layers.push_back(l);
  return p;
}

// Scalar loss sum(c .* f(x)) evaluated through a plain forward pass.
double projected_output(const Params& p, const Eigen::VectorXd& x, const Eigen::VectorXd& c) {
  return c.dot(mlp_forward(p, x));
}

}  // namespace

TEST_CASE("mlp_init builds the requested stack") {
  const std::vector<int> sizes{3, 512, 512, 2};
  const Params p = mlp_init(sizes, Activation::elu, 7);
  REQUIRE(p.layers.size() == 3);
  CHECK(p.layer_sizes() == sizes);
  CHECK(p.layers[0].activation == Activation::elu);
  CHECK(p.layers[1].activation == Activation::elu);
  CHECK(p.layers[2].activation == Activation::identity);
  CHECK(p.num_params() == 3 * 512 + 512 + 512 * 512 + 512 + 512 * 2 + 2);
  const double bound = 1.0 / std::sqrt(512.0);
  CHECK(p.layers[1].weight.cwiseAbs().maxCoeff() <= bound);
  CHECK(std::abs(p.layers[1].weight.mean()) < 0.01);
}

TEST_CASE("mlp_init zero biases and determinism") {
  const std::vector<int> sizes{2, 2};
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) CHECK(mlp_init(sizes, Activation::gelu, seed).layers[0].bias.isZero(0.0));

  const std::vector<int> big{5, 16, 16, 3};
  const Params a = mlp_init(big, Activation::gelu, 11);
  const Params b = mlp_init(big, Activation::gelu, 11);
  CHECK((a.flatten().array() == b.flatten().array()).all());
  const Params c = mlp_init(big, Activation::gelu, 12);
  CHECK_FALSE((a.flatten().array() == c.flatten().array()).all());
}

TEST_CASE("mlp_init rejects bad sizes") {
  CHECK_THROWS_AS(mlp_init(std::vector<int>{}, Activation::elu, 0), ConfigError);
  CHECK_THROWS_AS(mlp_init(std::vector<int>{4}, Activation::elu, 0), ConfigError);
  CHECK_THROWS_AS(mlp_init(std::vector<int>{4, 0, 2}, Activation::elu, 0), ConfigError);
  CHECK_THROWS_AS(mlp_init(std::vector<int>{4, -3}, Activation::elu, 0), ConfigError);
}

TEST_CASE("mlp_forward arithmetic") {
  Params zero = mlp_init(std::vector<int>{3, 4, 2}, Activation::elu, 1);
  zero.set_zero();
  CHECK(mlp_forward(zero, Eigen::Vector3d(1, -2, 3)).isZero(0.0));

  const Params affine = single_affine(2.0, 1.0);
  CHECK(mlp_forward(affine, Eigen::VectorXd::Constant(1, 3.0))[0] == 7.0);

  CHECK_THROWS_AS(mlp_forward(affine, Eigen::Vector2d(1, 2)), ShapeError);
}

TEST_CASE("tape records every layer") {
  const Params p = mlp_init(std::vector<int>{3, 8, 8, 2}, Activation::gelu, 3);
  Tape tape;
  mlp_forward(p, Eigen::Vector3d(0.1, 0.2, 0.3), &tape);
  CHECK(tape.complete());
  CHECK(tape.inputs.size() == 3);
  CHECK(tape.preacts.size() == 3);
  Tape empty;
  CHECK_THROWS_AS(backward(empty, Eigen::VectorXd::Ones(2)), ShapeError);
  CHECK_THROWS_AS(backward(tape, Eigen::VectorXd::Ones(3)), ShapeError);
}

TEST_CASE("backward: half-square loss") {
  const Params identity = single_affine(1.0, 0.0);
  Tape tape;
  const Eigen::VectorXd y = mlp_forward(identity, Eigen::VectorXd::Constant(1, 3.0), &tape);
  // d(0.5 y^2)/dy = y
  const BackwardResult g = backward(tape, y);
  CHECK(g.input(0, 0) == 3.0);
}

TEST_CASE("backward: unused parameters get exact zeros") {
  const Params p = mlp_init(std::vector<int>{3, 6, 2}, Activation::elu, 5);
  Tape tape;
  mlp_forward(p, Eigen::Vector3d(0.3, -0.7, 1.1), &tape);
  const BackwardResult g = backward(tape, Eigen::Vector2d(1.0, 0.0));
  CHECK(g.params.layers[1].weight.row(1).isZero(0.0));
  CHECK(g.params.layers[1].bias[1] == 0.0);
  CHECK_FALSE(g.params.layers[1].weight.row(0).isZero(0.0));
}

TEST_CASE("input gradient matches a directional central difference") {
  for (auto act : {Activation::elu, Activation::gelu}) {
    const Params p = mlp_init(std::vector<int>{4, 16, 16, 3}, act, 21);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd x(4), dir(4), c(3);
      for (auto* v : {&x, &dir, &c})
        for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = n01(rng);
      Tape tape;
      mlp_forward(p, x, &tape);
      const BackwardResult g = backward(tape, c);
      const double analytic = g.input.col(0).dot(dir);
      const double fd = flac::testing::directional_difference(
          [&](const Eigen::VectorXd& xx) { return projected_output(p, xx, c); }, x, dir, 1e-5);
      CHECK(flac::testing::relative_error(analytic, fd) < 1e-4);
    }
  }
}

TEST_CASE("property: parameter gradients match central differences for downstream shapes") {
  struct Shape {
    std::vector<int> sizes;
    Activation act;
  };
  // Actor (2 hidden, elu) and critic (3 hidden, gelu) at a reduced width.
  const std::vector<Shape> shapes{{{5, 32, 32, 2}, Activation::elu}, {{4, 32, 32, 32, 1}, Activation::gelu}};
  int probes = 0;
  double worst = 0.0;
  for (std::size_t si = 0; si < shapes.size(); ++si) {
    const auto& sh = shapes[si];
    const Params base = mlp_init(sh.sizes, sh.act, 100 + si);
    std::mt19937_64 rng(7 + si);
    std::normal_distribution<double> n01;
    const int in = sh.sizes.front();
    const int out = sh.sizes.back();
    Eigen::MatrixXd x(in, 3);
    Eigen::MatrixXd c(out, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n01(rng);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = n01(rng);

    Tape tape;
    forward(base, x, &tape);
    const Eigen::VectorXd analytic = backward(tape, c).params.flatten();

    auto loss = [&](const Eigen::VectorXd& theta) {
      Params q = base;
      q.assign_flat(theta);
      return (c.array() * forward(q, x).array()).sum();
    };
    const Eigen::VectorXd theta = base.flatten();
    for (Eigen::Index coord : flac::testing::random_coordinates(theta.size(), 60, 31 + si)) {
      const double fd = flac::testing::central_difference(loss, theta, coord, 1e-5);
      worst = std::max(worst, flac::testing::relative_error(analytic[coord], fd, 1e-6));
      ++probes;
    }
  }
  CHECK(probes >= 100);
  CHECK(worst < 1e-3);
}

TEST_CASE("adam_step") {
  SUBCASE("first step moves every coordinate by about lr") {
    Params p = mlp_init(std::vector<int>{3, 4, 2}, Activation::elu, 2);
    const Params before = p;
    Gradients g = p.zeros_like();
    Eigen::VectorXd flat = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(g.num_params()), -2.0, 3.0);
    flat = flat.unaryExpr([](double v) { return std::abs(v) < 1e-3 ? 0.5 : v; });
    g.assign_flat(flat);
    AdamState st = adam_init(p);
    adam_step(p, g, st, 3e-4);
    CHECK(st.step == 1);
    const Eigen::VectorXd delta = (p.flatten() - before.flatten()).cwiseAbs();
    CHECK(delta.maxCoeff() == doctest::Approx(3e-4).epsilon(1e-4));
    CHECK(delta.minCoeff() == doctest::Approx(3e-4).epsilon(1e-4));
    // Descent direction.
    CHECK(((p.flatten() - before.flatten()).array() * flat.array() < 0).all());
  }
  SUBCASE("zero gradients from a fresh state leave parameters unchanged") {
    Params p = mlp_init(std::vector<int>{3, 4, 2}, Activation::elu, 2);
    const Params before = p;
    AdamState st = adam_init(p);
    for (int i = 0; i < 5; ++i) adam_step(p, p.zeros_like(), st, 3e-4);
    CHECK((p.flatten().array() == before.flatten().array()).all());
    CHECK(st.step == 5);
  }
  SUBCASE("non-finite gradient names the coordinate") {
    Params p = mlp_init(std::vector<int>{2, 3, 1}, Activation::elu, 2);
    Gradients g = p.zeros_like();
    g.layers[1].bias[0] = std::numeric_limits<double>::quiet_NaN();
    AdamState st = adam_init(p);
    try {
      adam_step(p, g, st, 1e-3);
      FAIL("expected NumericalFault");
    } catch (const NumericalFault& e) {
      CHECK(e.index() == 2 * 3 + 3 + 3);  // last coordinate
    }
    CHECK(st.step == 0);
  }
  SUBCASE("bad inputs") {
    Params p = mlp_init(std::vector<int>{2, 3, 1}, Activation::elu, 2);
    AdamState st = adam_init(p);
    CHECK_THROWS_AS(adam_step(p, p.zeros_like(), st, 0.0), ConfigError);
    const Params other = mlp_init(std::vector<int>{2, 4, 1}, Activation::elu, 2);
    CHECK_THROWS_AS(adam_step(p, other, st, 1e-3), ShapeError);
  }
}

TEST_CASE("polyak_update") {
  const Params online = mlp_init(std::vector<int>{3, 5, 2}, Activation::elu, 1);
  Params target = mlp_init(std::vector<int>{3, 5, 2}, Activation::elu, 2);
  const Params original = target;

  Params t0 = target;
  polyak_update(t0, online, 0.0);
  CHECK((t0.flatten().array() == original.flatten().array()).all());

  Params t1 = target;
  polyak_update(t1, online, 1.0);
  CHECK((t1.flatten().array() == online.flatten().array()).all());

  Params zero = online.zeros_like();
  Params ones = online.zeros_like();
  ones.assign_flat(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ones.num_params())));
  polyak_update(zero, ones, 0.005);
  CHECK((zero.flatten().array() == 0.005).all());

  // Fixed point for any rho.
  for (double rho : {0.0, 0.005, 0.3, 0.77, 1.0}) {
    Params same = online;
    polyak_update(same, online, rho);
    CHECK((same.flatten().array() == online.flatten().array()).all());
  }

  Params wrong = mlp_init(std::vector<int>{3, 6, 2}, Activation::elu, 1);
  CHECK_THROWS_AS(polyak_update(wrong, online, 0.5), ShapeError);
}

TEST_CASE("clip_global_norm") {
  Params g = mlp_init(std::vector<int>{2, 2}, Activation::identity, 0).zeros_like();
  g.layers[0].weight(0, 0) = 30.0;
  g.layers[0].bias[1] = 40.0;
  CHECK(clip_global_norm(g, 10.0) == doctest::Approx(50.0));
  CHECK(global_norm(g) == doctest::Approx(10.0));
  CHECK(g.layers[0].weight(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("checkpoint round-trips exactly") {
  Params p = mlp_init(std::vector<int>{4, 7, 7, 2}, Activation::gelu, 1234);
  p.layers[0].bias[2] = 4.9e-320;  // subnormal
  std::stringstream ss;
  write_params(ss, p);
  const Params q = read_params(ss);
  CHECK(q.layer_sizes() == p.layer_sizes());
  CHECK(q.seed == 1234);
  CHECK(q.layers[0].activation == Activation::gelu);
  CHECK(q.layers[2].activation == Activation::identity);
  CHECK((q.flatten().array() == p.flatten().array()).all());

  std::stringstream bad("flac-params 1\nlayers 2 2 2\nactivations identity\nseed 0\n1\n2\n");
  CHECK_THROWS_AS(read_params(bad), ConfigError);
}

TEST_CASE("normal_cdf tabulated values") {
  // Reference values to 16 digits.
  const std::vector<std::pair<double, double>> table{{0.0, 0.5},
                                                     {1.0, 0.8413447460685429},
                                                     {-1.0, 0.15865525393145705},
                                                     {-3.0, 0.0013498980316300946},
                                                     {-10.0, 7.619853024160527e-24},
                                                     {2.5, 0.9937903346742238}};
  Eigen::MatrixXd z(1, table.size());
  for (std::size_t i = 0; i < table.size(); ++i) z(0, i) = table[i].first;
  const Eigen::MatrixXd phi = normal_cdf(z);
  for (std::size_t i = 0; i < table.size(); ++i) CHECK(phi(0, i) == doctest::Approx(table[i].second).epsilon(1e-14));
  const Eigen::MatrixXd sym = normal_cdf(-z) + phi;
  CHECK((sym.array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("deep tails produce exact zeros, never subnormals") {
  // z = -38 puts Phi(z) and z*phi(z) below the smallest normal double.
  Params p = mlp_init(std::vector<int>{1, 3, 1}, Activation::gelu, 4);
  p.layers[0].weight << 1.0, 1.0, 1.0;
  p.layers[0].bias << 0.0, 0.0, 0.0;
  Eigen::MatrixXd x(1, 4);
  x << -38.0, -40.0, -1e3, -1e6;
  Tape tape;
  forward(p, x, &tape);
  const Eigen::MatrixXd& h = tape.inputs[1];
  for (Eigen::Index i = 0; i < h.size(); ++i) CHECK(h(i) == 0.0);
  const Eigen::MatrixXd dx = backward(tape, Eigen::MatrixXd::Ones(1, 4)).input;
  for (Eigen::Index i = 0; i < dx.size(); ++i) CHECK(dx(i) == 0.0);
  // Just inside the cut the values are small but normal.
  CHECK(std::fpclassify(normal_cdf(Eigen::MatrixXd::Constant(1, 1, -37.4))(0, 0)) == FP_NORMAL);

  Params e = p;
  for (auto& l : e.layers) l.activation = Activation::identity;
  e.layers[0].activation = Activation::elu;
  Tape te;
  forward(e, x, &te);
  CHECK((te.inputs[1].array() == -1.0).all());
}
