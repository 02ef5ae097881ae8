#include "flac/agent/agent.hpp"

#include "flac/errors.hpp"
#include "flac/flow/kernels.hpp"
#include "flac/nn/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace flac::agent {

double target_energy(int action_dim, double coeff) {
  if (action_dim < 1) throw ConfigError("target_energy: action_dim must be >= 1");
  if (!(coeff >= 0.0) || !std::isfinite(coeff)) throw ConfigError("target_energy: coefficient must be finite and >= 0");
  return coeff * action_dim;
}

void AgentConfig::validate() const {
  if (batch_size < 1) throw ConfigError("agent.batch must be positive");
  if (buffer_capacity < 1) throw ConfigError("agent.buffer must be positive");
  if (!(actor_lr > 0.0)) throw ConfigError("agent.actor_lr must be > 0");
  if (!(critic_lr > 0.0)) throw ConfigError("agent.critic_lr must be > 0");
  if (!(alpha_lr >= 0.0)) throw ConfigError("agent.alpha_lr must be >= 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("agent.gamma must lie in [0, 1)");
  if (!(energy_coeff >= 0.0)) throw ConfigError("agent.energy_coeff must be >= 0");
  if (warmup_steps < 0) throw ConfigError("agent.warmup must be >= 0");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("agent.polyak must lie in [0, 1]");
  if (updates_per_step < 1) throw ConfigError("agent.utd must be positive");
  if (!(grad_clip > 0.0)) throw ConfigError("agent.grad_clip must be > 0");
  if (auto_tune ? !(alpha > 0.0) : !(alpha >= 0.0)) throw ConfigError("agent.alpha out of range");
  if (hidden_width < 1 || actor_layers < 1 || critic_layers < 1) throw ConfigError("agent: network sizes must be positive");
  solver.validate();
}

namespace {

std::vector<int> stack(int in, int width, int hidden, int out) {
  std::vector<int> sizes{in};
  for (int i = 0; i < hidden; ++i) sizes.push_back(width);
  sizes.push_back(out);
  return sizes;
}

}  // namespace

Agent::Agent(const AgentConfig& cfg, int state_dim, int action_dim) : cfg_(cfg), ds_(state_dim), da_(action_dim) {
  cfg_.validate();
  if (ds_ < 1 || da_ < 1) throw ConfigError("agent: dimensions must be positive");
  e_tgt_ = agent::target_energy(da_, cfg_.energy_coeff);
  actor = nn::mlp_init(stack(ds_ + da_ + 1, cfg_.hidden_width, cfg_.actor_layers, da_), cfg_.actor_activation,
                       mix_seed(cfg_.seed, 1));
  critic1 = nn::mlp_init(stack(ds_ + da_, cfg_.hidden_width, cfg_.critic_layers, 1), cfg_.critic_activation,
                         mix_seed(cfg_.seed, 2));
  critic2 = nn::mlp_init(stack(ds_ + da_, cfg_.hidden_width, cfg_.critic_layers, 1), cfg_.critic_activation,
                         mix_seed(cfg_.seed, 3));
  target1 = critic1;
  target2 = critic2;
  actor_opt = nn::adam_init(actor);
  critic1_opt = nn::adam_init(critic1);
  critic2_opt = nn::adam_init(critic2);
  log_alpha_ = cfg_.auto_tune ? std::log(cfg_.alpha) : 0.0;
  train_rng_ = make_rng(cfg_.seed, 10);
  explore_rng_ = make_rng(cfg_.seed, 11);
  eval_rng_ = make_rng(cfg_.seed, 12);
}

double Agent::alpha() const { return cfg_.auto_tune ? std::exp(log_alpha_) : cfg_.alpha; }

void Agent::set_log_alpha(double v) {
  if (!std::isfinite(v)) throw NumericalFault("agent: non-finite log alpha", 0);
  log_alpha_ = std::clamp(v, -kLogAlphaLimit, kLogAlphaLimit);
}

Eigen::MatrixXd Agent::critic_input(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) const {
  Eigen::MatrixXd in(ds_ + da_, a.cols());
  if (s.cols() == a.cols())
    in.topRows(ds_) = s;
  else
    in.topRows(ds_) = s.col(0).replicate(1, a.cols());
  in.bottomRows(da_) = a;
  return in;
}

flow::GenerationBatch Agent::run_generation(const Eigen::MatrixXd& states, const flow::NoiseDraws& noise) const {
  return cfg_.parallel ? flow::generate_batch_omp(actor, states, cfg_.solver, noise)
                       : flow::generate_batch_serial(actor, states, cfg_.solver, noise);
}

double Agent::q1(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  return nn::forward(critic1, critic_input(s, a))(0, 0);
}

Eigen::VectorXd Agent::critic_target(const Batch& batch) {
  Eigen::VectorXd y = batch.r;
  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < batch.size(); ++i)
    if (batch.done[i] == 0.0) live.push_back(i);
  if (live.empty() || cfg_.gamma == 0.0) return y;

  const auto n = static_cast<Eigen::Index>(live.size());
  Eigen::MatrixXd s2(ds_, n);
  for (Eigen::Index j = 0; j < n; ++j) s2.col(j) = batch.s2.col(live[j]);
  const flow::NoiseDraws noise = flow::draw_noise(cfg_.solver, da_, n, train_rng_);
  const flow::GenerationBatch next = run_generation(s2, noise);
  const Eigen::MatrixXd in = critic_input(s2, next.actions);
  const Eigen::MatrixXd q1 = nn::forward(target1, in);
  const Eigen::MatrixXd q2 = nn::forward(target2, in);
  const double a = alpha();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double q = std::min(q1(0, j), q2(0, j));
    if (!std::isfinite(q)) throw NumericalFault("critic_target: non-finite target critic value", live[j]);
    y[live[j]] += cfg_.gamma * (q - a * next.energy[j]);
  }
  return y;
}

double Agent::critic_update(const Batch& batch, const Eigen::VectorXd& y) {
  if (batch.size() == 0) throw ConfigError("critic_update: empty batch");
  if (y.size() != batch.size()) throw ShapeError("critic_update: target length");
  const Eigen::MatrixXd in = critic_input(batch.s, batch.a);
  const auto b = static_cast<double>(batch.size());
  double loss = 0.0;
  auto one = [&](nn::Params& critic, nn::AdamState& opt) {
    nn::Tape tape;
    const Eigen::MatrixXd q = nn::forward(critic, in, &tape);
    const Eigen::RowVectorXd res = q.row(0) - y.transpose();
    loss += 0.5 * res.squaredNorm() / b;
    nn::Gradients g = nn::backward(tape, res / b).params;
    nn::clip_global_norm(g, cfg_.grad_clip);
    return std::make_pair(std::move(g), &opt);
  };
  auto [g1, o1] = one(critic1, critic1_opt);
  auto [g2, o2] = one(critic2, critic2_opt);
  nn::adam_step(critic1, g1, *o1, cfg_.critic_lr);
  nn::adam_step(critic2, g2, *o2, cfg_.critic_lr);
  return loss;
}

double Agent::critic_update(const Batch& batch) { return critic_update(batch, critic_target(batch)); }

ActorStep Agent::actor_update(const Batch& batch) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw ConfigError("actor_update: empty batch");
  const double inv_b = 1.0 / static_cast<double>(n);
  const double a = alpha();
  const nn::Params& q = critic1;
  const flow::TerminalFn terminal = [&](const Eigen::MatrixXd& s, const Eigen::MatrixXd& act) {
    nn::Tape tape;
    const Eigen::MatrixXd v = nn::forward(q, critic_input(s, act), &tape);
    const Eigen::MatrixXd g = nn::backward_input(tape, Eigen::MatrixXd::Constant(1, act.cols(), -inv_b));
    return flow::TerminalTerm{g.bottomRows(da_), -inv_b * v.row(0).transpose()};
  };
  const flow::NoiseDraws noise = flow::draw_noise(cfg_.solver, da_, n, train_rng_);
  flow::PathwiseBatch pb = cfg_.parallel
                               ? flow::pathwise_batch_omp(actor, batch.s, cfg_.solver, noise, terminal, a * inv_b)
                               : flow::pathwise_batch_serial(actor, batch.s, cfg_.solver, noise, terminal, a * inv_b);
  ActorStep out;
  out.mean_energy = pb.energy.mean();
  out.loss = pb.terminal_value.sum() + a * out.mean_energy;
  nn::clip_global_norm(pb.grads, cfg_.grad_clip);
  nn::adam_step(actor, pb.grads, actor_opt, cfg_.actor_lr);
  return out;
}

double Agent::alpha_update(double mean_energy) {
  if (!cfg_.auto_tune) return log_alpha_;
  if (!std::isfinite(mean_energy)) throw NumericalFault("alpha_update: non-finite energy", 0);
  set_log_alpha(log_alpha_ + cfg_.alpha_lr * (mean_energy - e_tgt_));
  return log_alpha_;
}

void Agent::update_targets() {
  nn::polyak_update(target1, critic1, cfg_.polyak);
  nn::polyak_update(target2, critic2, cfg_.polyak);
}

StepMetrics Agent::train_step(const ReplayBuffer& buffer) {
  StepMetrics m;
  m.alpha = alpha();
  m.log_alpha = log_alpha_;
  const std::size_t ready = std::max<std::size_t>(static_cast<std::size_t>(cfg_.warmup_steps), 1);
  if (buffer.total_pushed() < ready || buffer.size() < static_cast<std::size_t>(cfg_.batch_size)) return m;
  m.collecting = false;
  for (int u = 0; u < cfg_.updates_per_step; ++u) {
    const Batch batch = buffer.sample(cfg_.batch_size, train_rng_);
    m.critic_loss = critic_update(batch);
    const ActorStep as = actor_update(batch);
    m.actor_loss = as.loss;
    m.mean_energy = as.mean_energy;
    alpha_update(as.mean_energy);
    update_targets();
  }
  m.alpha = alpha();
  m.log_alpha = log_alpha_;
  return m;
}

flow::GenerationBatch Agent::sample_many(const Eigen::VectorXd& state, int n, ActMode mode) {
  if (state.size() != ds_) throw ShapeError("agent: state dimension");
  Rng& rng = mode == ActMode::eval ? eval_rng_ : explore_rng_;
  const flow::NoiseDraws noise = flow::draw_noise(cfg_.solver, da_, n, rng);
  return run_generation(Eigen::MatrixXd(state), noise);
}

Eigen::VectorXd Agent::act(const Eigen::VectorXd& state, ActMode mode) {
  if (state.size() != ds_) throw ShapeError("agent: state dimension");
  Rng& rng = mode == ActMode::eval ? eval_rng_ : explore_rng_;
  const flow::NoiseDraws noise = flow::draw_noise(cfg_.solver, da_, 1, rng);
  return flow::generate_batch_serial(actor, Eigen::MatrixXd(state), cfg_.solver, noise).actions.col(0);
}

void Agent::reset_eval_stream(std::uint64_t seed) { eval_rng_ = make_rng(seed, 12); }

namespace {

void expect(std::istream& is, const std::string& want) {
  std::string got;
  if (!(is >> got) || got != want) throw ConfigError("checkpoint: expected '" + want + "', got '" + got + "'");
}

void read_into(std::istream& is, nn::Params& dst, const char* name) {
  nn::Params p = nn::read_params(is);
  if (!p.same_shape(dst)) throw ConfigError(std::string("checkpoint: ") + name + " shape does not match the config");
  dst = std::move(p);
}

}  // namespace

void save_checkpoint(std::ostream& os, const Agent& agent, std::uint64_t config_hash) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", agent.log_alpha());
  os << "flac-agent 1\nconfig_hash " << config_hash << "\nlog_alpha " << buf << '\n';
  for (const auto* p : {&agent.actor, &agent.critic1, &agent.critic2, &agent.target1, &agent.target2})
    nn::write_params(os, *p);
}

void load_checkpoint(std::istream& is, Agent& agent, std::uint64_t config_hash) {
  expect(is, "flac-agent");
  expect(is, "1");
  expect(is, "config_hash");
  std::uint64_t h = 0;
  if (!(is >> h)) throw ConfigError("checkpoint: bad config hash");
  if (h != config_hash) throw ConfigError("checkpoint: config hash mismatch");
  expect(is, "log_alpha");
  std::string tok;
  if (!(is >> tok)) throw ConfigError("checkpoint: missing log alpha");
  char* end = nullptr;
  const double la = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw ConfigError("checkpoint: bad log alpha");
  read_into(is, agent.actor, "actor");
  read_into(is, agent.critic1, "critic1");
  read_into(is, agent.critic2, "critic2");
  read_into(is, agent.target1, "target1");
  read_into(is, agent.target2, "target2");
  agent.set_log_alpha(la);
}

nn::Params read_checkpoint_actor(std::istream& is) {
  expect(is, "flac-agent");
  expect(is, "1");
  std::string tok;
  for (int i = 0; i < 4; ++i)
    if (!(is >> tok)) throw ConfigError("checkpoint: truncated header");
  return nn::read_params(is);
}

}  // namespace flac::agent
