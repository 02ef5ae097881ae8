#include "flac/app/config.hpp"
#include "flac/app/runs.hpp"
#include "flac/errors.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace flac;

namespace {

void print_run(const app::RunArtifacts& a) {
  std::printf("%s: return %.6g energy %.6g alpha %.6g", a.dir.string().c_str(), a.final_return, a.final_energy,
              a.final_alpha);
  if (a.final_coverage >= 0) std::printf(" coverage %d/8", a.final_coverage);
  std::printf("\n");
}

int dispatch(const app::RunConfig& cfg) {
  switch (cfg.command) {
    case app::Command::toy:
      for (const auto& a : app::run_toy(cfg)) print_run(a);
      return 0;
    case app::Command::train:
      print_run(app::run_train(cfg));
      return 0;
    case app::Command::ablate: {
      const auto res = app::run_ablation(cfg);
      for (const auto& a : res.cells) print_run(a);
      std::printf("summary: %s\n", res.summary.string().c_str());
      return 0;
    }
    case app::Command::check:
      return app::run_check(cfg, std::cout) ? 0 : 1;
    case app::Command::export_field:
      for (const auto& p : app::run_export_field(cfg).fields) std::printf("%s\n", p.string().c_str());
      return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Field least-energy actor-critic experiments"};
  cli.require_subcommand(1);
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  const std::pair<const char*, const char*> commands[] = {
      {"toy", "train on the 8-goal bandit and export fields, action clouds and coverage"},
      {"train", "collect/learn loop with periodic evaluation"},
      {"ablate", "one run per energy coefficient in ablate.grid"},
      {"check", "closed-form and Monte Carlo theory checks"},
      {"export-field", "dump the drift field of a checkpointed actor"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = cli.add_subcommand(name, help);
    sub->add_option("--config", config, "flat key = value config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "run seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("overrides", overrides, "key=value overrides applied last");
  }
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::vector<std::string> all{"run.command=" + cli.get_subcommands().front()->get_name()};
    if (seed) all.push_back("run.seed=" + std::to_string(*seed));
    if (!out.empty()) all.push_back("run.out=" + out);
    all.insert(all.end(), overrides.begin(), overrides.end());
    return dispatch(app::load_config(config, all));
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
