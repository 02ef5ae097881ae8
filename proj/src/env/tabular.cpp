#include "flac/env/environments.hpp"

#include "flac/errors.hpp"

#include <cmath>

namespace flac::env {

void TabularMDP::validate() const {
  if (n_states < 1 || n_actions < 1) throw ConfigError("mdp: sizes must be >= 1");
  if (P.rows() != static_cast<Eigen::Index>(n_states) * n_actions || P.cols() != n_states)
    throw ShapeError("mdp: transition tensor shape");
  if (r.rows() != n_states || r.cols() != n_actions || e.rows() != n_states || e.cols() != n_actions)
    throw ShapeError("mdp: reward/energy table shape");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("mdp: gamma must lie in [0, 1)");
  if ((P.array() < 0.0).any()) throw ConfigError("mdp: negative transition probability");
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    if (std::abs(P.row(i).sum() - 1.0) > 1e-12) throw ConfigError("mdp: transition row does not sum to 1");
  if ((e.array() < 0.0).any()) throw ConfigError("mdp: negative energy");
}

TabularMDP make_random_mdp(int n_states, int n_actions, std::uint64_t seed, double gamma) {
  if (n_states < 1 || n_actions < 1) throw ConfigError("make_random_mdp: sizes must be >= 1");
  TabularMDP m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.P.resize(static_cast<Eigen::Index>(n_states) * n_actions, n_states);
  m.r.resize(n_states, n_actions);
  m.e.resize(n_states, n_actions);
  Rng rng = make_rng(seed, 0x4d4450);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < m.P.rows(); ++i) {
    for (int j = 0; j < n_states; ++j) m.P(i, j) = expo(rng);
    m.P.row(i) /= m.P.row(i).sum();
  }
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) m.r(s, a) = unif(rng);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) m.e(s, a) = unif(rng);
  m.validate();
  return m;
}

}  // namespace flac::env
