#include "flac/errors.hpp"
#include "flac/theory/checks.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace flac::theory {

void GridDistribution::validate() const {
  if (support.size() != prob.size() || prob.size() == 0) throw ShapeError("grid distribution: sizes");
  if ((prob.array() < 0.0).any()) throw ConfigError("grid distribution: negative probability");
  if (std::abs(prob.sum() - 1.0) > 1e-12) throw ConfigError("grid distribution: probabilities do not sum to 1");
}

namespace {

// exp(v - logsumexp(v)); -inf entries map to 0.
Eigen::VectorXd normalize_log(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  Eigen::VectorXd p = (v.array() - m).exp();
  return p / p.sum();
}

void check_inputs(const Eigen::VectorXd& G, const Eigen::VectorXd& mu, double alpha) {
  if (G.size() != mu.size() || G.size() == 0) throw ShapeError("gsb: potential and reference sizes differ");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("gsb: alpha must be finite and > 0");
  if (!G.allFinite()) throw ConfigError("gsb: potential must be finite");
  if ((mu.array() < 0.0).any() || !(mu.sum() > 0.0)) throw ConfigError("gsb: bad reference measure");
}

Eigen::VectorXd safe_log(const Eigen::VectorXd& p) {
  return p.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity(); });
}

}  // namespace

Eigen::VectorXd boltzmann_tilt(const Eigen::VectorXd& G, const Eigen::VectorXd& mu_ref, double alpha) {
  check_inputs(G, mu_ref, alpha);
  return normalize_log(safe_log(mu_ref) - G / alpha);
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw ShapeError("total_variation: sizes");
  return 0.5 * (p - q).cwiseAbs().sum();
}

MirrorDescentResult mirror_descent_gsb(const Eigen::VectorXd& G, const Eigen::VectorXd& mu_ref, double alpha,
                                       int max_iter, double tol) {
  check_inputs(G, mu_ref, alpha);
  const Eigen::Index n = G.size();
  const Eigen::VectorXd log_mu = safe_log(mu_ref);
  const double range = G.maxCoeff() - G.minCoeff();
  const double eta = 0.5 / (alpha * std::max(1.0, range));

  MirrorDescentResult res;
  // Points outside the reference support carry infinite divergence; they start and stay at zero.
  Eigen::VectorXd log_p = log_mu.unaryExpr([n](double v) {
    return std::isfinite(v) ? -std::log(static_cast<double>(n)) : -std::numeric_limits<double>::infinity();
  });
  res.p = normalize_log(log_p);
  log_p = safe_log(res.p);
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd next_log(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(log_mu[i])) {
        next_log[i] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const double grad = alpha * (log_p[i] - log_mu[i] + 1.0) + G[i];
      next_log[i] = log_p[i] - eta * grad;
    }
    const Eigen::VectorXd next = normalize_log(next_log);
    res.last_change = total_variation(next, res.p);
    res.p = next;
    log_p = safe_log(next);
    res.iterations = it;
    if (res.last_change < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

CheckReport gsb_boltzmann_check(const std::string& name, const Eigen::VectorXd& G, const GridDistribution& mu_ref,
                                double alpha) {
  mu_ref.validate();
  const Eigen::VectorXd closed = boltzmann_tilt(G, mu_ref.prob, alpha);
  const MirrorDescentResult md = mirror_descent_gsb(G, mu_ref.prob, alpha);
  CheckReport r = make_report(name, total_variation(closed, md.p), 0.0, Relation::eq, 1e-6, G.size(), 0);
  r.pass = r.pass && md.converged;
  std::ostringstream os;
  os << "iterations=" << md.iterations << " residual=" << md.last_change << (md.converged ? "" : " not_converged");
  r.detail = os.str();
  return r;
}

}  // namespace flac::theory
