#include "flac/app/runs.hpp"

#include "flac/env/environments.hpp"
#include "flac/errors.hpp"
#include "flac/nn/checkpoint.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>

namespace fs = std::filesystem;

namespace flac::app {

namespace {

// Fixed-format numbers keep metrics byte-identical across identical runs.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

void write_config(const RunConfig& cfg, const fs::path& dir, RunArtifacts& art) {
  fs::create_directories(dir);
  art.dir = dir;
  art.config = dir / "config.txt";
  open_out(art.config) << to_text(cfg);
}

void write_checkpoint(const agent::Agent& ag, const RunConfig& cfg, RunArtifacts& art) {
  const fs::path p = art.dir / "checkpoint.txt";
  auto os = open_out(p);
  agent::save_checkpoint(os, ag, config_hash(cfg));
  art.checkpoints.push_back(p);
}

const char* kMetricsHeader = "step,episode_return,critic_loss,actor_loss,alpha,mean_energy,e_tgt\n";

void metrics_row(std::ostream& os, long step, double ret, const agent::StepMetrics& m, double energy, double e_tgt) {
  os << step << ',' << num(ret) << ',' << num(m.critic_loss) << ',' << num(m.actor_loss) << ',' << num(m.alpha) << ','
     << num(energy) << ',' << num(e_tgt) << '\n';
  os.flush();  // evaluations are minutes apart on long runs
}

Eigen::VectorXd warmup_action(const env::EnvSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> u(-spec.action_bound, spec.action_bound);
  Eigen::VectorXd a(spec.action_dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = u(rng);
  return a;
}

constexpr std::uint64_t kTrainEpisodeStream = 100;
constexpr std::uint64_t kEvalEpisodeStream = 1'000'000;
constexpr std::uint64_t kEvalPolicyStream = 2'000'000;
constexpr std::uint64_t kToySnapshotStream = 3'000'000;

RunArtifacts toy_single(const RunConfig& cfg, const fs::path& dir, const StepObserver& observe) {
  RunArtifacts art;
  write_config(cfg, dir, art);
  env::MultiGoalBandit env;
  agent::Agent ag(cfg.agent, 1, 2);
  agent::ReplayBuffer buf(cfg.agent.buffer_capacity, 1, 2);
  const Eigen::VectorXd s0 = env.reset(cfg.seed);

  art.metrics = dir / "metrics.csv";
  art.trace = dir / "trace.csv";
  art.coverage = dir / "coverage.csv";
  auto metrics = open_out(art.metrics);
  auto trace = open_out(art.trace);
  auto coverage = open_out(art.coverage);
  metrics << kMetricsHeader;
  trace << "step,mean_energy,alpha\n";
  coverage << "step,covered";
  for (int k = 0; k < env::kNumGoals; ++k) coverage << ",goal_" << k + 1;
  coverage << '\n';

  agent::StepMetrics last;
  last.alpha = ag.alpha();
  last.log_alpha = ag.log_alpha();
  flow::GenerationBatch cloud;
  auto snapshot = [&](long step) {
    ag.reset_eval_stream(mix_seed(cfg.seed, kToySnapshotStream));
    cloud = ag.sample_many(s0, cfg.toy_samples, agent::ActMode::eval);
    const env::CoverageResult cov = env::mode_coverage(cloud.actions, cfg.capture_radius, cfg.min_fraction);
    double ret = 0.0;
    for (Eigen::Index i = 0; i < cloud.actions.cols(); ++i) ret += env::multigoal_reward(cloud.actions.col(i));
    ret /= static_cast<double>(cloud.actions.cols());

    coverage << step << ',' << cov.covered;
    for (double f : cov.fraction) coverage << ',' << num(f);
    coverage << '\n';
    metrics_row(metrics, step, ret, last, cloud.energy.mean(), ag.target_energy());

    const fs::path ap = dir / ("actions_" + std::to_string(step) + ".csv");
    auto as = open_out(ap);
    as << "a1,a2\n";
    for (Eigen::Index i = 0; i < cloud.actions.cols(); ++i)
      as << num(cloud.actions(0, i)) << ',' << num(cloud.actions(1, i)) << '\n';
    art.actions.push_back(ap);
    for (double tau : cfg.taus) {
      const fs::path fp = dir / ("field_" + std::to_string(step) + "_tau" + tag(tau) + ".csv");
      auto fsx = open_out(fp);
      flow::write_field_csv(fsx, flow::export_field_grid(ag.actor, s0, tau, cfg.field_grid));
      art.fields.push_back(fp);
    }
    art.final_coverage = cov.covered;
    art.max_coverage = std::max(art.max_coverage, cov.covered);
    art.final_return = ret;
    art.final_energy = cloud.energy.mean();
  };

  snapshot(0);
  for (long t = 1; t <= cfg.steps; ++t) {
    const Eigen::VectorXd a = ag.act(s0, agent::ActMode::explore);
    const env::StepResult r = env.step(a);
    buf.push({s0, a, r.reward, r.next_state, r.terminal});
    last = ag.train_step(buf);
    if (observe) observe(t, last);
    if (!last.collecting && t % cfg.trace_interval == 0)
      trace << t << ',' << num(last.mean_energy) << ',' << num(last.alpha) << '\n';
    if (t % cfg.snapshot_interval == 0 || t == cfg.steps) snapshot(t);
  }
  art.final_alpha = ag.alpha();

  if (cfg.svg) {
    const fs::path sp = dir / "field.svg";
    auto os = open_out(sp);
    write_toy_svg(os, flow::export_field_grid(ag.actor, s0, 0.5, cfg.field_grid), cloud.actions);
    art.extra.push_back(sp);
  }
  write_checkpoint(ag, cfg, art);
  return art;
}

}  // namespace

std::vector<fs::path> RunArtifacts::files() const {
  std::vector<fs::path> out;
  for (const fs::path* p : {&config, &metrics, &trace, &coverage})
    if (!p->empty()) out.push_back(*p);
  for (const auto* v : {&checkpoints, &fields, &actions, &extra}) out.insert(out.end(), v->begin(), v->end());
  return out;
}

fs::path run_directory(const RunConfig& cfg) {
  if (!cfg.stamp) return cfg.out;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  return cfg.out / (cfg.env + "_" + std::to_string(cfg.seed) + "_" + stamp);
}

double evaluate_policy(agent::Agent& ag, const RunConfig& cfg) {
  double total = 0.0;
  for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
    const auto env = env::make_environment(cfg.env);
    Eigen::VectorXd s = env->reset(mix_seed(cfg.seed, kEvalEpisodeStream + ep));
    ag.reset_eval_stream(mix_seed(cfg.seed, kEvalPolicyStream + ep));
    while (true) {
      const env::StepResult r = env->step(ag.act(s, agent::ActMode::eval));
      total += r.reward;
      s = r.next_state;
      if (r.done) break;
    }
  }
  return total / cfg.eval_episodes;
}

RunArtifacts run_train(const RunConfig& cfg, const StepObserver& observe) {
  cfg.validate();
  RunArtifacts art;
  write_config(cfg, run_directory(cfg), art);
  const auto env = env::make_environment(cfg.env);
  const env::EnvSpec spec = env->spec();
  agent::Agent ag(cfg.agent, spec.state_dim, spec.action_dim);
  agent::ReplayBuffer buf(cfg.agent.buffer_capacity, spec.state_dim, spec.action_dim);

  art.metrics = art.dir / "metrics.csv";
  art.trace = art.dir / "trace.csv";
  auto metrics = open_out(art.metrics);
  auto trace = open_out(art.trace);
  metrics << kMetricsHeader;
  trace << "step,mean_energy,alpha,log_alpha\n";

  Rng warm = make_rng(cfg.seed, 20);
  std::uint64_t episode = 0;
  Eigen::VectorXd s = env->reset(mix_seed(cfg.seed, kTrainEpisodeStream + episode));
  agent::StepMetrics last;
  last.alpha = ag.alpha();
  auto eval_row = [&](long step) {
    art.final_return = evaluate_policy(ag, cfg);
    metrics_row(metrics, step, art.final_return, last, last.mean_energy, ag.target_energy());
  };

  if (cfg.steps == 0) eval_row(0);
  for (long t = 1; t <= cfg.steps; ++t) {
    const bool random = t <= cfg.agent.warmup_steps && std::isfinite(spec.action_bound);
    const Eigen::VectorXd a = random ? warmup_action(spec, warm) : ag.act(s, agent::ActMode::explore);
    const env::StepResult r = env->step(a);
    buf.push({s, a, r.reward, r.next_state, r.terminal});
    s = r.next_state;
    if (r.done) s = env->reset(mix_seed(cfg.seed, kTrainEpisodeStream + ++episode));
    last = ag.train_step(buf);
    if (observe) observe(t, last);
    if (!last.collecting && t % cfg.trace_interval == 0)
      trace << t << ',' << num(last.mean_energy) << ',' << num(last.alpha) << ',' << num(last.log_alpha) << '\n';
    if (t % cfg.eval_interval == 0 || t == cfg.steps) eval_row(t);
  }
  art.final_energy = last.mean_energy;
  art.final_alpha = ag.alpha();
  write_checkpoint(ag, cfg, art);
  return art;
}

std::vector<RunArtifacts> run_toy(const RunConfig& cfg, const StepObserver& observe) {
  cfg.validate();
  if (cfg.env != "multigoal") throw ConfigError("config key 'run.env': toy needs multigoal");
  const fs::path dir = run_directory(cfg);
  std::vector<RunArtifacts> out;
  out.push_back(toy_single(cfg, dir, observe));
  if (cfg.toy_naive) {
    RunConfig naive = cfg;
    naive.toy_naive = false;
    naive.agent.auto_tune = false;
    naive.agent.alpha = 0.0;
    out.push_back(toy_single(naive, dir / "naive", observe));
  }
  return out;
}

AblationResult run_ablation(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.grid.empty()) throw ConfigError("config key 'ablate.grid': must not be empty");
  const fs::path base = run_directory(cfg);
  fs::create_directories(base);
  AblationResult res;
  res.summary = base / "summary.csv";
  auto summary = open_out(res.summary);
  summary << "coefficient,final_return,final_energy,final_alpha\n";
  for (double c : cfg.grid) {
    RunConfig cell = cfg;
    cell.command = cfg.env == "multigoal" ? Command::toy : Command::train;
    cell.toy_naive = false;
    cell.agent.energy_coeff = c;
    if (cfg.fixed_alpha) {
      cell.agent.auto_tune = false;
      cell.agent.alpha = *cfg.fixed_alpha;
    }
    cell.stamp = false;
    cell.out = base / ("C_" + tag(c));
    RunArtifacts art = cfg.env == "multigoal" ? run_toy(cell).front() : run_train(cell);
    summary << num(c) << ',' << num(art.final_return) << ',' << num(art.final_energy) << ',' << num(art.final_alpha)
            << '\n';
    summary.flush();
    res.coefficients.push_back(c);
    res.cells.push_back(std::move(art));
  }
  return res;
}

bool run_check(const RunConfig& cfg, std::ostream& os, std::vector<theory::CheckReport>* out) {
  const auto reports = theory::run_all_checks(cfg.seed, cfg.girsanov);
  bool ok = true;
  os << "name,lhs,rhs,relation,tolerance,pass\n";
  for (const auto& r : reports) {
    os << r.name << ',' << num(r.lhs) << ',' << num(r.rhs) << ',' << theory::to_string(r.relation) << ','
       << num(r.tolerance) << ',' << (r.pass ? "true" : "false") << '\n';
    ok = ok && r.pass;
  }
  if (out) *out = reports;
  return ok;
}

RunArtifacts run_export_field(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.checkpoint.empty()) throw ConfigError("config key 'field.checkpoint': required for export-field");
  std::ifstream in(cfg.checkpoint);
  if (!in) throw ConfigError("config key 'field.checkpoint': cannot read " + cfg.checkpoint.string());
  const nn::Params actor = agent::read_checkpoint_actor(in);
  const env::EnvSpec spec = env::make_environment(cfg.env)->spec();
  const int ds = actor.input_dim() - spec.action_dim - 1;
  if (ds != spec.state_dim || actor.output_dim() != spec.action_dim)
    throw ConfigError("config key 'field.checkpoint': actor does not match environment " + cfg.env);
  Eigen::VectorXd state = Eigen::VectorXd::Zero(ds);
  if (!cfg.field_state.empty()) {
    if (static_cast<int>(cfg.field_state.size()) != ds)
      throw ConfigError("config key 'field.state': expected " + std::to_string(ds) + " values");
    state = Eigen::Map<const Eigen::VectorXd>(cfg.field_state.data(), ds);
  }
  RunArtifacts art;
  write_config(cfg, run_directory(cfg), art);
  for (double tau : cfg.taus) {
    const fs::path p = art.dir / ("field_tau" + tag(tau) + ".csv");
    auto os = open_out(p);
    flow::write_field_csv(os, flow::export_field_grid(actor, state, tau, cfg.field_grid));
    art.fields.push_back(p);
  }
  return art;
}

void write_toy_svg(std::ostream& os, const std::vector<flow::FieldRow>& field, const Eigen::MatrixXd& actions) {
  const double lo = -6.0, hi = 6.0, px = 40.0;
  const double size = (hi - lo) * px;
  auto X = [&](double x) { return (x - lo) * px; };
  auto Y = [&](double y) { return (hi - y) * px; };
  char buf[160];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& g : env::goal_positions()) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"none\" stroke=\"#c33\"/>\n",
                  X(g.x()), Y(g.y()), px);
    os << buf;
  }
  double vmax = 1e-12;
  for (const auto& r : field) vmax = std::max(vmax, std::hypot(r.u1, r.u2));
  const double scale = 0.45 / vmax;
  for (const auto& r : field) {
    std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#36c\"/>\n", X(r.x1),
                  Y(r.x2), X(r.x1 + scale * r.u1), Y(r.x2 + scale * r.u2));
    os << buf;
  }
  for (Eigen::Index i = 0; i < actions.cols(); ++i) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.5\" fill=\"#222\" fill-opacity=\"0.5\"/>\n",
                  X(actions(0, i)), Y(actions(1, i)));
    os << buf;
  }
  os << "</svg>\n";
}

}  // namespace flac::app
