#include "flac/errors.hpp"
#include "flac/random.hpp"
#include "flac/theory/checks.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <vector>

namespace flac::theory {

std::string_view to_string(Relation r) { return r == Relation::eq ? "eq" : "leq"; }

bool relation_holds(double lhs, double rhs, Relation rel, double tol) {
  if (!std::isfinite(lhs) || !std::isfinite(rhs)) return false;
  return rel == Relation::eq ? std::abs(lhs - rhs) <= tol : lhs <= rhs + tol;
}

CheckReport make_report(std::string name, double lhs, double rhs, Relation rel, double tol, long n,
                        std::uint64_t seed) {
  CheckReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.relation = rel;
  r.tolerance = tol;
  r.n_samples = n;
  r.seed = seed;
  r.pass = relation_holds(lhs, rhs, rel, tol);
  return r;
}

namespace {

constexpr int kPathBlock = 1024;

struct BlockSums {
  double log_rn = 0.0;
  double energy = 0.0;
  double diff = 0.0;
  double diff_sq = 0.0;
};

BlockSums simulate_block(const DriftField& drift, int dim, double sigma, std::uint64_t seed, long block, long paths,
                         const GirsanovOptions& opts) {
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(block));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double dt = 1.0 / opts.n_steps;
  const double sdt = std::sqrt(dt);
  const double quad_sign = opts.wrong_sign ? -1.0 : 1.0;
  BlockSums s;
  Eigen::VectorXd x(dim), z(dim);
  for (long p = 0; p < paths; ++p) {
    for (int i = 0; i < dim; ++i) x[i] = normal(rng);
    double log_rn = 0.0;
    double energy = 0.0;
    for (int k = 0; k < opts.n_steps; ++k) {
      const Eigen::VectorXd u = drift(k * dt, x);
      for (int i = 0; i < dim; ++i) z[i] = normal(rng);
      const Eigen::VectorXd beta = u / sigma;
      log_rn += sdt * beta.dot(z) + quad_sign * 0.5 * beta.squaredNorm() * dt;
      energy += 0.5 * u.squaredNorm() * dt;
      x += u * dt + sigma * sdt * z;
    }
    const double e_kl = energy / (sigma * sigma);
    s.log_rn += log_rn;
    s.energy += e_kl;
    s.diff += log_rn - e_kl;
    s.diff_sq += (log_rn - e_kl) * (log_rn - e_kl);
  }
  return s;
}

}  // namespace

GirsanovEstimate girsanov_estimate(const DriftField& drift, int dim, double sigma, std::uint64_t seed,
                                   const GirsanovOptions& opts) {
  if (!(sigma > 0.0)) throw NotApplicable("girsanov: path KL needs sigma > 0");
  if (dim < 1 || opts.n_paths < 2 || opts.n_steps < 1) throw ConfigError("girsanov: bad sizes");
  const long n = opts.n_paths;
  const long n_blocks = (n + kPathBlock - 1) / kPathBlock;
  std::vector<BlockSums> blocks(static_cast<std::size_t>(n_blocks));
  auto run = [&](long b) {
    const long count = std::min<long>(kPathBlock, n - b * kPathBlock);
    blocks[static_cast<std::size_t>(b)] = simulate_block(drift, dim, sigma, seed, b, count, opts);
  };
  if (opts.parallel) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_blocks));
#pragma omp parallel for schedule(dynamic, 1)
    for (long b = 0; b < n_blocks; ++b) {
      try {
        run(b);
      } catch (...) {
        errors[static_cast<std::size_t>(b)] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (long b = 0; b < n_blocks; ++b) run(b);
  }
  BlockSums total;
  for (const auto& b : blocks) {
    total.log_rn += b.log_rn;
    total.energy += b.energy;
    total.diff += b.diff;
    total.diff_sq += b.diff_sq;
  }
  const double nn = static_cast<double>(n);
  GirsanovEstimate est;
  est.n_paths = n;
  est.path_kl = total.log_rn / nn;
  est.energy_kl = total.energy / nn;
  const double mean_diff = total.diff / nn;
  const double var = std::max(0.0, (total.diff_sq - nn * mean_diff * mean_diff) / (nn - 1.0));
  est.std_error = std::sqrt(var / nn);
  return est;
}

CheckReport girsanov_kl_check(const std::string& name, const DriftField& drift, int dim, double sigma,
                              std::uint64_t seed, const GirsanovOptions& opts) {
  const GirsanovEstimate est = girsanov_estimate(drift, dim, sigma, seed, opts);
  CheckReport r = make_report(name, est.path_kl, est.energy_kl, Relation::eq, 4.0 * est.std_error, est.n_paths, seed);
  std::ostringstream os;
  os << "std_error=" << est.std_error << " n_steps=" << opts.n_steps;
  r.detail = os.str();
  return r;
}

DriftField constant_drift(const Eigen::VectorXd& c) {
  return [c](double, const Eigen::VectorXd&) { return c; };
}

double gaussian_kl(const Eigen::VectorXd& m1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& m0,
                   const Eigen::MatrixXd& s0) {
  const Eigen::Index k = m1.size();
  if (m0.size() != k || s1.rows() != k || s1.cols() != k || s0.rows() != k || s0.cols() != k)
    throw ShapeError("gaussian_kl: dimensions");
  const Eigen::LLT<Eigen::MatrixXd> l0(s0), l1(s1);
  if (l0.info() != Eigen::Success || l1.info() != Eigen::Success)
    throw ConfigError("gaussian_kl: covariance is not positive definite");
  const Eigen::VectorXd d = m0 - m1;
  const double trace = l0.solve(s1).trace();
  const double maha = d.dot(l0.solve(d));
  double logdet0 = 0.0, logdet1 = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    logdet0 += 2.0 * std::log(l0.matrixL()(i, i));
    logdet1 += 2.0 * std::log(l1.matrixL()(i, i));
  }
  return std::max(0.0, 0.5 * (trace + maha - static_cast<double>(k) + logdet0 - logdet1));
}

CheckReport dpi_terminal_check(const std::string& name, const Eigen::VectorXd& c, double sigma) {
  if (!(sigma > 0.0)) throw NotApplicable("dpi: path KL needs sigma > 0");
  const Eigen::Index k = c.size();
  // X_1 = X_0 + c + sigma W_1 with X_0 ~ N(0, I).
  const Eigen::MatrixXd cov = (1.0 + sigma * sigma) * Eigen::MatrixXd::Identity(k, k);
  const double terminal = gaussian_kl(c, cov, Eigen::VectorXd::Zero(k), cov);
  const double path = 0.5 * c.squaredNorm() / (sigma * sigma);
  return make_report(name, terminal, path, Relation::leq, 1e-10, 0, 0);
}

Eigen::VectorXd PolynomialFlow::displacement() const {
  if (coeffs.empty()) throw ConfigError("polynomial flow: no coefficients");
  Eigen::VectorXd d = Eigen::VectorXd::Zero(coeffs.front().size());
  for (std::size_t j = 0; j < coeffs.size(); ++j) d += coeffs[j] / static_cast<double>(j + 1);
  return d;
}

double PolynomialFlow::kinetic_energy() const {
  double e = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    for (std::size_t j = 0; j < coeffs.size(); ++j)
      e += coeffs[i].dot(coeffs[j]) / static_cast<double>(i + j + 1);
  return 0.5 * e;
}

CheckReport benamou_bound_check(const std::string& name, const PolynomialFlow& flow, Relation relation) {
  const double w2_sq = flow.displacement().squaredNorm();
  const double two_e = 2.0 * flow.kinetic_energy();
  CheckReport r = make_report(name, w2_sq, two_e, relation, 1e-10, 0, 0);
  std::ostringstream os;
  os << "slack=" << two_e - w2_sq;
  r.detail = os.str();
  return r;
}

}  // namespace flac::theory
