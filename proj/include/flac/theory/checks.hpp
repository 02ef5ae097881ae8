#pragma once

#include "flac/env/environments.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace flac::theory {

enum class Relation { eq, leq };

std::string_view to_string(Relation r);

struct CheckReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  Relation relation = Relation::eq;
  double tolerance = 0.0;  // absolute
  long n_samples = 0;      // MC paths, grid points or trials
  bool pass = false;
  std::uint64_t seed = 0;
  std::string detail;
};

// eq: |lhs - rhs| <= tol; leq: lhs <= rhs + tol.
bool relation_holds(double lhs, double rhs, Relation rel, double tol);
CheckReport make_report(std::string name, double lhs, double rhs, Relation rel, double tol, long n,
                        std::uint64_t seed);

// ---- path measures ----

using DriftField = std::function<Eigen::VectorXd(double tau, const Eigen::VectorXd& x)>;

struct GirsanovOptions {
  int n_paths = 100000;
  int n_steps = 16;
  bool parallel = true;
  // Test hook: flips the sign of the quadratic term, the classic mistake of
  // using the reference-measure form of the density.
  bool wrong_sign = false;
};

struct GirsanovEstimate {
  double path_kl = 0.0;     // MC mean of log dP/dP_ref along controlled paths
  double energy_kl = 0.0;   // MC mean of E / sigma^2 on the same paths
  double std_error = 0.0;   // of the paired difference
  long n_paths = 0;
};

// Simulates dX = u dtau + sigma dW from X_0 ~ N(0, I) with Euler-Maruyama.
// Paths are split into fixed blocks, each with its own seeded stream, and
// reduced in block order: serial and parallel runs give identical numbers.
GirsanovEstimate girsanov_estimate(const DriftField& drift, int dim, double sigma, std::uint64_t seed,
                                   const GirsanovOptions& opts = {});

// Passes when |path KL - E / sigma^2| <= 4 standard errors. sigma == 0 throws NotApplicable.
CheckReport girsanov_kl_check(const std::string& name, const DriftField& drift, int dim, double sigma,
                              std::uint64_t seed, const GirsanovOptions& opts = {});

DriftField constant_drift(const Eigen::VectorXd& c);

// KL(N(m1, S1) || N(m0, S0)).
double gaussian_kl(const Eigen::VectorXd& m1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& m0,
                   const Eigen::MatrixXd& s0);

// Constant drift c from X_0 ~ N(0, I): terminal laws N(c, (1 + sigma^2) I) and
// N(0, (1 + sigma^2) I). Checks terminal KL <= |c|^2 / (2 sigma^2).
CheckReport dpi_terminal_check(const std::string& name, const Eigen::VectorXd& c, double sigma);

// u(tau) = sum_j coeffs[j] tau^j, applied to every particle (a rigid translation).
struct PolynomialFlow {
  std::vector<Eigen::VectorXd> coeffs;

  Eigen::VectorXd displacement() const;  // int_0^1 u
  double kinetic_energy() const;         // int_0^1 0.5 |u|^2, exact
};

// W2^2 between the prior and its translate (|displacement|^2) against 2 E.
// `relation` eq demands equality (geodesic flows), leq the bound.
CheckReport benamou_bound_check(const std::string& name, const PolynomialFlow& flow, Relation relation);

// ---- Boltzmann tilt ----

struct GridDistribution {
  Eigen::VectorXd support;
  Eigen::VectorXd prob;
  void validate() const;
};

// p* proportional to mu_ref exp(-G / alpha), computed in log space.
Eigen::VectorXd boltzmann_tilt(const Eigen::VectorXd& G, const Eigen::VectorXd& mu_ref, double alpha);

struct MirrorDescentResult {
  Eigen::VectorXd p;
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;  // TV between the last two iterates
};

// Exponentiated-gradient descent on alpha KL(p || mu_ref) + <p, G> from the
// uniform distribution. Step 0.5 / (alpha max(1, range G)); stops when
// successive iterates are within 1e-10 in total variation.
MirrorDescentResult mirror_descent_gsb(const Eigen::VectorXd& G, const Eigen::VectorXd& mu_ref, double alpha,
                                       int max_iter = 10000, double tol = 1e-10);

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

CheckReport gsb_boltzmann_check(const std::string& name, const Eigen::VectorXd& G, const GridDistribution& mu_ref,
                                double alpha);

// ---- tabular operators ----

// Energy under pi: E_pi(s) = sum_a pi(s, a) e(s, a).
Eigen::VectorXd policy_energy(const env::TabularMDP& mdp, const Eigen::MatrixXd& policy);

// (T Q)(s, a) = r + gamma sum_s' P(s'|s, a) [ sum_a' pi(a'|s') Q(s', a') - alpha E_pi(s') ].
Eigen::MatrixXd tabular_backup(const env::TabularMDP& mdp, const Eigen::MatrixXd& policy, const Eigen::MatrixXd& Q,
                               double alpha);

// Fixed point of tabular_backup by a dense linear solve.
Eigen::MatrixXd evaluate_policy(const env::TabularMDP& mdp, const Eigen::MatrixXd& policy, double alpha);

// Optimal Q of the regularized problem by value iteration (sup-norm change < tol).
Eigen::MatrixXd value_iteration(const env::TabularMDP& mdp, double alpha, double tol = 1e-13, int max_iter = 100000);

// Per-state argmax of Q - alpha e, ties (within 1e-12) split uniformly.
Eigen::MatrixXd greedy_policy(const env::TabularMDP& mdp, const Eigen::MatrixXd& Q, double alpha);

Eigen::MatrixXd random_policy(int n_states, int n_actions, std::uint64_t seed);

// Max ratio |TQ1 - TQ2|_inf / |Q1 - Q2|_inf over random pairs against gamma.
// Also requires constant shifts to give ratio gamma and iterated backups to
// reach the linear-solve fixed point within 1e-8.
CheckReport contraction_check(const std::string& name, const env::TabularMDP& mdp, const Eigen::MatrixXd& policy,
                              double alpha, int n_trials, std::uint64_t seed);

struct ImprovementTrace {
  double max_decrease = 0.0;  // max over rounds and (s, a) of Q_old - Q_new
  double min_objective_gain = 0.0;
  bool matches_value_iteration = false;
  int rounds = 0;
};

ImprovementTrace improvement_rounds(const env::TabularMDP& mdp, double alpha, int n_rounds, std::uint64_t seed);

CheckReport improvement_check(const std::string& name, const env::TabularMDP& mdp, double alpha, int n_rounds,
                              std::uint64_t seed);

// Every check with default settings, in a fixed order.
std::vector<CheckReport> run_all_checks(std::uint64_t seed, const GirsanovOptions& girsanov = {});

}  // namespace flac::theory
