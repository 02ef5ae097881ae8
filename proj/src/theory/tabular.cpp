#include "flac/errors.hpp"
#include "flac/random.hpp"
#include "flac/theory/checks.hpp"

#include <cmath>
#include <sstream>

namespace flac::theory {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_policy(const env::TabularMDP& mdp, const Eigen::MatrixXd& policy) {
  if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions) throw ShapeError("policy table shape");
  for (int s = 0; s < mdp.n_states; ++s)
    if ((policy.row(s).array() < 0.0).any() || std::abs(policy.row(s).sum() - 1.0) > 1e-9)
      throw ConfigError("policy row " + std::to_string(s) + " is not a probability vector");
}

// Q(s, a) at flat index s * A + a.
Eigen::VectorXd flat(const Eigen::MatrixXd& Q) {
  const RowMajor rm = Q;
  return Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size());
}

Eigen::MatrixXd unflat(const Eigen::VectorXd& q, int n_states, int n_actions) {
  return Eigen::Map<const RowMajor>(q.data(), n_states, n_actions);
}

// Soft value under pi: sum_a pi Q - alpha E_pi.
Eigen::VectorXd policy_value(const env::TabularMDP& mdp, const Eigen::MatrixXd& policy, const Eigen::MatrixXd& Q,
                             double alpha) {
  return (policy.array() * Q.array()).rowwise().sum().matrix() - alpha * policy_energy(mdp, policy);
}

}  // namespace

Eigen::VectorXd policy_energy(const env::TabularMDP& mdp, const Eigen::MatrixXd& policy) {
  check_policy(mdp, policy);
  return (policy.array() * mdp.e.array()).rowwise().sum();
}

Eigen::MatrixXd tabular_backup(const env::TabularMDP& mdp, const Eigen::MatrixXd& policy, const Eigen::MatrixXd& Q,
                               double alpha) {
  check_policy(mdp, policy);
  if (Q.rows() != mdp.n_states || Q.cols() != mdp.n_actions) throw ShapeError("tabular_backup: Q shape");
  const Eigen::VectorXd v = policy_value(mdp, policy, Q, alpha);
  const Eigen::VectorXd next = mdp.P * v;
  return mdp.r + mdp.gamma * unflat(next, mdp.n_states, mdp.n_actions);
}

Eigen::MatrixXd evaluate_policy(const env::TabularMDP& mdp, const Eigen::MatrixXd& policy, double alpha) {
  check_policy(mdp, policy);
  const int S = mdp.n_states, A = mdp.n_actions;
  // (I - gamma P Pi) q = r - gamma alpha P E_pi, with Pi(s, s * A + a) = pi(a | s).
  Eigen::MatrixXd Pi = Eigen::MatrixXd::Zero(S, static_cast<Eigen::Index>(S) * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) Pi(s, mdp.row(s, a)) = policy(s, a);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S * A, S * A) - mdp.gamma * mdp.P * Pi;
  const Eigen::VectorXd b = flat(mdp.r) - mdp.gamma * alpha * (mdp.P * policy_energy(mdp, policy));
  return unflat(M.partialPivLu().solve(b), S, A);
}

Eigen::MatrixXd value_iteration(const env::TabularMDP& mdp, double alpha, double tol, int max_iter) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd v = (Q - alpha * mdp.e).rowwise().maxCoeff();
    const Eigen::MatrixXd next = mdp.r + mdp.gamma * unflat(mdp.P * v, mdp.n_states, mdp.n_actions);
    const double change = (next - Q).cwiseAbs().maxCoeff();
    Q = next;
    if (change < tol) break;
  }
  return Q;
}

Eigen::MatrixXd greedy_policy(const env::TabularMDP& mdp, const Eigen::MatrixXd& Q, double alpha) {
  const Eigen::MatrixXd obj = Q - alpha * mdp.e;
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    const double best = obj.row(s).maxCoeff();
    int ties = 0;
    for (int a = 0; a < mdp.n_actions; ++a)
      if (obj(s, a) >= best - 1e-12) ++ties;
    for (int a = 0; a < mdp.n_actions; ++a)
      if (obj(s, a) >= best - 1e-12) pi(s, a) = 1.0 / ties;
  }
  return pi;
}

Eigen::MatrixXd random_policy(int n_states, int n_actions, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x504f4c);
  std::exponential_distribution<double> expo(1.0);
  Eigen::MatrixXd pi(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) pi(s, a) = expo(rng);
    pi.row(s) /= pi.row(s).sum();
  }
  return pi;
}

CheckReport contraction_check(const std::string& name, const env::TabularMDP& mdp, const Eigen::MatrixXd& policy,
                              double alpha, int n_trials, std::uint64_t seed) {
  if (n_trials < 1) throw ConfigError("contraction_check: n_trials must be >= 1");
  mdp.validate();
  Rng rng = make_rng(seed, 0x434f4e);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  auto random_q = [&] {
    Eigen::MatrixXd Q(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a) Q(s, a) = unif(rng);
    return Q;
  };
  double worst = 0.0;
  for (int t = 0; t < n_trials; ++t) {
    const Eigen::MatrixXd q1 = random_q(), q2 = random_q();
    const double gap = (q1 - q2).cwiseAbs().maxCoeff();
    if (gap == 0.0) continue;
    const double out =
        (tabular_backup(mdp, policy, q1, alpha) - tabular_backup(mdp, policy, q2, alpha)).cwiseAbs().maxCoeff();
    worst = std::max(worst, out / gap);
  }

  const Eigen::MatrixXd base = random_q();
  const double shift = 3.25;
  const double shift_ratio = (tabular_backup(mdp, policy, base.array() + shift, alpha) -
                              tabular_backup(mdp, policy, base, alpha))
                                 .cwiseAbs()
                                 .maxCoeff() /
                             shift;
  const bool shift_ok = std::abs(shift_ratio - mdp.gamma) <= 1e-12;

  const Eigen::MatrixXd exact = evaluate_policy(mdp, policy, alpha);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (int it = 0; it < 100000; ++it) {
    const Eigen::MatrixXd next = tabular_backup(mdp, policy, q, alpha);
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (change < 1e-13) break;
  }
  const double fp_err = (q - exact).cwiseAbs().maxCoeff();

  CheckReport r = make_report(name, worst, mdp.gamma, Relation::leq, 1e-12, n_trials, seed);
  r.pass = r.pass && shift_ok && fp_err <= 1e-8;
  std::ostringstream os;
  os << "shift_ratio=" << shift_ratio << " fixed_point_err=" << fp_err;
  r.detail = os.str();
  return r;
}

ImprovementTrace improvement_rounds(const env::TabularMDP& mdp, double alpha, int n_rounds, std::uint64_t seed) {
  if (n_rounds < 1) throw ConfigError("improvement_check: n_rounds must be >= 1");
  mdp.validate();
  ImprovementTrace tr;
  tr.min_objective_gain = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd pi = random_policy(mdp.n_states, mdp.n_actions, seed);
  Eigen::MatrixXd Q = evaluate_policy(mdp, pi, alpha);
  for (int round = 0; round < n_rounds; ++round) {
    const Eigen::MatrixXd next_pi = greedy_policy(mdp, Q, alpha);
    const Eigen::MatrixXd next_Q = evaluate_policy(mdp, next_pi, alpha);
    tr.max_decrease = std::max(tr.max_decrease, (Q - next_Q).maxCoeff());
    const Eigen::VectorXd gain = policy_value(mdp, next_pi, next_Q, alpha) - policy_value(mdp, pi, Q, alpha);
    tr.min_objective_gain = std::min(tr.min_objective_gain, gain.minCoeff());
    pi = next_pi;
    Q = next_Q;
    ++tr.rounds;
  }
  const Eigen::MatrixXd optimal = greedy_policy(mdp, value_iteration(mdp, alpha), alpha);
  tr.matches_value_iteration = (pi - optimal).cwiseAbs().maxCoeff() < 1e-12;
  return tr;
}

CheckReport improvement_check(const std::string& name, const env::TabularMDP& mdp, double alpha, int n_rounds,
                              std::uint64_t seed) {
  const ImprovementTrace tr = improvement_rounds(mdp, alpha, n_rounds, seed);
  CheckReport r = make_report(name, tr.max_decrease, 0.0, Relation::leq, 1e-10, n_rounds, seed);
  r.pass = r.pass && tr.min_objective_gain >= -1e-10 && tr.matches_value_iteration;
  std::ostringstream os;
  os << "min_objective_gain=" << tr.min_objective_gain << " matches_value_iteration=" << tr.matches_value_iteration;
  r.detail = os.str();
  return r;
}

}  // namespace flac::theory
