#include <doctest.h>

#include "flac/app/config.hpp"
#include "flac/app/runs.hpp"
#include "flac/errors.hpp"

#include <unistd.h>

#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace flac;
using namespace flac::app;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("flac_test_app_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::string error_of(const std::vector<std::string>& overrides) {
  try {
    load_config_text("", overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

RunConfig tiny_train(const fs::path& out) {
  return load_config_text("run.env = pointmass\n", {"run.out=" + out.string(), "run.stamp=false", "run.steps=300",
                                                    "run.eval_interval=100", "run.eval_episodes=2", "agent.width=16",
                                                    "agent.batch=32", "agent.warmup=100", "run.trace_interval=10",
                                                    "run.seed=4"});
}

RunConfig tiny_toy(const fs::path& out, long steps) {
  return load_config_text("", {"run.command=toy", "run.out=" + out.string(), "run.stamp=false",
                               "run.steps=" + std::to_string(steps), "agent.width=16", "agent.batch=32",
                               "agent.warmup=50", "solver.steps=4", "toy.samples=200", "toy.snapshot_interval=100",
                               "field.resolution=5", "run.trace_interval=10"});
}

void check_artifacts(const RunArtifacts& a) {
  for (const auto& p : a.files()) {
    INFO(p.string());
    CHECK(fs::exists(p));
    CHECK(fs::file_size(p) > 0);
  }
}

}  // namespace

TEST_CASE("empty config gives the hyperparameter table defaults") {
  const RunConfig c = load_config_text("");
  CHECK(c.agent.batch_size == 256);
  CHECK(c.agent.gamma == 0.99);
  CHECK(c.agent.solver.n_steps == 2);
  CHECK(c.agent.solver.scheme == flow::Scheme::midpoint);
  CHECK(c.agent.energy_coeff == 0.5);
  CHECK(c.agent.actor_lr == 3e-4);
  CHECK(c.agent.hidden_width == 512);
  CHECK(c.agent.buffer_capacity == 1000000);
  CHECK(c.env == "pointmass");
}

TEST_CASE("a single override changes only its key") {
  const RunConfig base = load_config_text("");
  const RunConfig c = load_config_text("", {"agent.batch=64"});
  CHECK(c.agent.batch_size == 64);
  const auto a = lines(to_text(base)), b = lines(to_text(c));
  REQUIRE(a.size() == b.size());
  int diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) {
      ++diff;
      CHECK(b[i] == "agent.batch = 64");
    }
  CHECK(diff == 1);
}

TEST_CASE("invalid configs name the key") {
  CHECK(error_of({"agent.gamma=1.5"}).find("agent.gamma") != std::string::npos);
  CHECK(error_of({"agent.bogus=1"}).find("agent.bogus") != std::string::npos);
  CHECK(error_of({"agent.batch=abc"}).find("agent.batch") != std::string::npos);
  CHECK(error_of({"agent.auto_tune=maybe"}).find("agent.auto_tune") != std::string::npos);
  CHECK(error_of({"solver.scheme=rk4"}).find("solver.scheme") != std::string::npos);
  CHECK(error_of({"run.env=cartpole"}).find("run.env") != std::string::npos);
  CHECK(error_of({"no_equals_sign"}).find("no_equals_sign") != std::string::npos);
  CHECK_THROWS_AS(load_config_text("agent.gamma = -0.1\n"), ConfigError);
  CHECK_THROWS_AS(load_config_text("agent.energy_coeff = -1\n"), ConfigError);
  CHECK_THROWS_AS(load_config(scratch("missing") / "none.conf"), ConfigError);
}

TEST_CASE("layering: preset, file, overrides") {
  const RunConfig toy = load_config_text("", {"run.command=toy"});
  CHECK(toy.env == "multigoal");
  CHECK(toy.agent.hidden_width == 64);
  CHECK(toy.agent.solver.n_steps == 24);
  CHECK(toy.agent.solver.scheme == flow::Scheme::euler);
  CHECK(toy.agent.solver.prior == flow::Prior::standard_gaussian);
  CHECK_FALSE(toy.agent.solver.bounded());
  CHECK(toy.agent.buffer_capacity == 100000);
  CHECK(toy.steps == 30000);

  const RunConfig file = load_config_text("run.env = multigoal\nagent.width = 32  # comment\n", {"run.seed=9"});
  CHECK(file.agent.hidden_width == 32);
  CHECK(file.agent.solver.n_steps == 24);
  CHECK(file.seed == 9);
  CHECK(file.agent.seed == 9);
  const RunConfig cli = load_config_text("agent.width = 32\n", {"agent.width=8"});
  CHECK(cli.agent.hidden_width == 8);
}

TEST_CASE("resolved config round-trips") {
  const RunConfig c = load_config_text("run.env = multigoal\nablate.grid = 0, 2.5\nablate.fixed_alpha = 0.2\n",
                                       {"agent.alpha_lr=1e-3", "run.seed=12", "field.state=0.5"});
  const RunConfig back = load_config_text(to_text(c));
  CHECK(back == c);
  CHECK(back.grid == std::vector<double>{0.0, 2.5});
  CHECK(back.fixed_alpha == 0.2);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(load_config_text("", {"run.seed=13"})) != config_hash(load_config_text("", {"run.seed=12"})));
  CHECK(config_keys().size() == lines(to_text(c)).size());
}

TEST_CASE("run_check") {
  RunConfig c = load_config_text("", {"check.paths=20000"});
  std::ostringstream os;
  std::vector<theory::CheckReport> r1, r2;
  CHECK(run_check(c, os, &r1));
  CHECK(lines(os.str()).front() == "name,lhs,rhs,relation,tolerance,pass");
  CHECK(lines(os.str()).size() == r1.size() + 1);
  c.seed = 2;
  std::ostringstream os2;
  CHECK(run_check(c, os2, &r2));
  CHECK(r1[1].lhs != r2[1].lhs);
  c.girsanov.wrong_sign = true;
  std::ostringstream os3;
  CHECK_FALSE(run_check(c, os3));
}

TEST_CASE("run_train artifacts and determinism") {
  const RunConfig ca = tiny_train(scratch("train_a"));
  const RunArtifacts a = run_train(ca);
  const RunArtifacts b = run_train(tiny_train(scratch("train_b")));
  check_artifacts(a);
  const std::string ma = slurp(a.metrics);
  CHECK(ma == slurp(b.metrics));
  const auto rows = lines(ma);
  CHECK(rows.front() == "step,episode_return,critic_loss,actor_loss,alpha,mean_energy,e_tgt");
  CHECK(rows.size() == 4);
  CHECK(load_config(a.config) == ca);

  RunConfig fixed = tiny_train(scratch("train_fixed"));
  fixed.agent.auto_tune = false;
  fixed.agent.alpha = 0.25;
  const RunArtifacts f = run_train(fixed);
  for (std::size_t i = 1; i < lines(slurp(f.metrics)).size(); ++i) {
    std::istringstream row(lines(slurp(f.metrics))[i]);
    std::string field;
    for (int k = 0; k < 5; ++k) std::getline(row, field, ',');
    CHECK(field == "0.25");
  }
}

TEST_CASE("run_toy with zero steps keeps the initial snapshot only") {
  const auto runs = run_toy(tiny_toy(scratch("toy0"), 0));
  REQUIRE(runs.size() == 1);
  check_artifacts(runs[0]);
  CHECK(runs[0].actions.size() == 1);
  CHECK(runs[0].fields.size() == 3);
  CHECK(lines(slurp(runs[0].coverage)).size() == 2);
  CHECK(lines(slurp(runs[0].fields[0])).size() == 26);
  CHECK(runs[0].final_coverage >= 0);
}

TEST_CASE("run_toy with the naive baseline") {
  RunConfig c = tiny_toy(scratch("toy_naive"), 200);
  c.toy_naive = true;
  const auto runs = run_toy(c);
  REQUIRE(runs.size() == 2);
  for (const auto& r : runs) check_artifacts(r);
  CHECK(runs[1].dir == c.out / "naive");
  CHECK(runs[1].final_alpha == 0.0);
  CHECK(runs[0].actions.size() == 3);
  CHECK(slurp(runs[0].extra.front()).rfind("<svg", 0) == 0);

  RunConfig exp = load_config_text("", {"run.command=export-field", "run.env=multigoal", "run.stamp=false",
                                        "run.out=" + scratch("export").string(),
                                        "field.checkpoint=" + runs[0].checkpoints.front().string()});
  const RunArtifacts e = run_export_field(exp);
  check_artifacts(e);
  REQUIRE(e.fields.size() == 3);
  CHECK(lines(slurp(e.fields[0])).size() == 401);
  CHECK(slurp(e.fields[1]) != slurp(e.fields[2]));
  exp.field_state = {1.0, 2.0};
  CHECK_THROWS_AS(run_export_field(exp), ConfigError);
}

TEST_CASE("ablation with one cell matches a plain run") {
  RunConfig c = tiny_train(scratch("ablate"));
  c.command = Command::ablate;
  c.grid = {0.5};
  const AblationResult res = run_ablation(c);
  REQUIRE(res.cells.size() == 1);
  const RunArtifacts plain = run_train(tiny_train(scratch("ablate_plain")));
  CHECK(slurp(res.cells[0].metrics) == slurp(plain.metrics));
  const auto rows = lines(slurp(res.summary));
  CHECK(rows.front() == "coefficient,final_return,final_energy,final_alpha");
  CHECK(rows.size() == 2);
  c.grid.clear();
  CHECK_THROWS_AS(run_ablation(c), ConfigError);
}

TEST_CASE("stamped run directory") {
  RunConfig c = load_config_text("", {"run.seed=7", "run.out=/tmp/x"});
  const std::string name = run_directory(c).filename().string();
  CHECK(name.rfind("pointmass_7_", 0) == 0);
  CHECK(name.size() == std::string("pointmass_7_").size() + 15);
}
