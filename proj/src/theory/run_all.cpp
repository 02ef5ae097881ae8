#include "flac/random.hpp"
#include "flac/theory/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace flac::theory {

namespace {

CheckReport gsb_suite(std::uint64_t seed) {
  const int n = 64;
  GridDistribution mu;
  mu.support = Eigen::VectorXd::LinSpaced(n, -3.0, 3.0);
  mu.prob = (-0.5 * mu.support.array().square()).exp();
  mu.prob /= mu.prob.sum();
  Rng rng = make_rng(seed, 0x475342);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  bool all = true;
  int cases = 0;
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd G(n);
    for (int i = 0; i < n; ++i) G[i] = normal(rng);
    for (double alpha : {0.1, 1.0, 10.0}) {
      const CheckReport r = gsb_boltzmann_check("gsb", G, mu, alpha);
      worst = std::max(worst, r.lhs);
      all = all && r.pass;
      ++cases;
    }
  }
  CheckReport r = make_report("gsb_boltzmann", worst, 0.0, Relation::eq, 1e-6, n, seed);
  r.pass = r.pass && all;
  r.detail = "cases=" + std::to_string(cases);
  return r;
}

CheckReport improvement_suite(const std::string& name, double alpha, std::uint64_t seed) {
  double worst = 0.0;
  double min_gain = std::numeric_limits<double>::infinity();
  bool vi = true;
  const int n_mdps = 10;
  for (int m = 0; m < n_mdps; ++m) {
    const env::TabularMDP mdp = env::make_random_mdp(5, 3, mix_seed(seed, 100 + m), 0.9);
    const ImprovementTrace tr = improvement_rounds(mdp, alpha, 10, mix_seed(seed, 200 + m));
    worst = std::max(worst, tr.max_decrease);
    min_gain = std::min(min_gain, tr.min_objective_gain);
    vi = vi && tr.matches_value_iteration;
  }
  CheckReport r = make_report(name, worst, 0.0, Relation::leq, 1e-10, n_mdps * 10, seed);
  r.pass = r.pass && min_gain >= -1e-10 && vi;
  std::ostringstream os;
  os << "mdps=" << n_mdps << " min_objective_gain=" << min_gain << " matches_value_iteration=" << vi;
  r.detail = os.str();
  return r;
}

}  // namespace

std::vector<CheckReport> run_all_checks(std::uint64_t seed, const GirsanovOptions& girsanov) {
  std::vector<CheckReport> out;
  out.push_back(girsanov_kl_check("girsanov_zero", constant_drift(Eigen::Vector2d::Zero()), 2, 1.0,
                                  mix_seed(seed, 1), girsanov));
  out.push_back(girsanov_kl_check("girsanov_c10_s1", constant_drift(Eigen::Vector2d(1.0, 0.0)), 2, 1.0,
                                  mix_seed(seed, 2), girsanov));
  out.push_back(girsanov_kl_check("girsanov_c11_s2", constant_drift(Eigen::Vector2d(1.0, 1.0)), 2, 2.0,
                                  mix_seed(seed, 3), girsanov));
  const DriftField pull = [](double, const Eigen::VectorXd& x) -> Eigen::VectorXd { return -x; };
  out.push_back(girsanov_kl_check("girsanov_linear_s1", pull, 2, 1.0, mix_seed(seed, 4), girsanov));

  out.push_back(dpi_terminal_check("dpi_c10_s1", Eigen::Vector2d(1.0, 0.0), 1.0));
  out.push_back(dpi_terminal_check("dpi_c20_s1", Eigen::Vector2d(2.0, 0.0), 1.0));

  const Eigen::Vector2d m(1.5, -0.5);
  out.push_back(benamou_bound_check("benamou_constant", PolynomialFlow{{m}}, Relation::eq));
  out.push_back(
      benamou_bound_check("benamou_linear", PolynomialFlow{{Eigen::Vector2d::Zero(), Eigen::Vector2d(2.0 * m)}},
                          Relation::leq));

  out.push_back(gsb_suite(mix_seed(seed, 5)));

  const env::TabularMDP mdp = env::make_random_mdp(6, 3, mix_seed(seed, 6), 0.9);
  out.push_back(contraction_check("contraction", mdp, random_policy(6, 3, mix_seed(seed, 7)), 0.5, 100,
                                  mix_seed(seed, 8)));

  out.push_back(improvement_suite("improvement_alpha0", 0.0, mix_seed(seed, 9)));
  out.push_back(improvement_suite("improvement_alpha0.3", 0.3, mix_seed(seed, 10)));
  return out;
}

}  // namespace flac::theory
