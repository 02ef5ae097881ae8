#include "flac/app/config.hpp"

#include "flac/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace flac::app {

std::string_view to_string(Command c) {
  switch (c) {
    case Command::toy: return "toy";
    case Command::train: return "train";
    case Command::ablate: return "ablate";
    case Command::check: return "check";
    case Command::export_field: return "export-field";
  }
  return "train";
}

Command command_from_string(std::string_view name) {
  for (Command c : {Command::toy, Command::train, Command::ablate, Command::check, Command::export_field})
    if (to_string(c) == name) return c;
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(const std::string& key, std::string_view value, const char* what) {
  throw ConfigError("config key '" + key + "': " + what + " (got '" + std::string(value) + "')");
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, std::string_view v) {
  if (v == "inf") return flow::kUnbounded;
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || std::isnan(out)) bad(key, v, "expected a number");
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, std::string_view v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "expected an integer");
  return out;
}

bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, v, "expected true or false");
}

std::vector<double> parse_list(const std::string& key, std::string_view v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(parse_double(key, trim(v.substr(start, comma - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt_double(xs[i]);
  return s;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, std::string_view)> set;
};

template <typename Int>
Field int_field(Int RunConfig::*m) {
  return {[m](const RunConfig& c) { return std::to_string(c.*m); },
          [m](RunConfig& c, const std::string& k, std::string_view v) { c.*m = parse_int<Int>(k, v); }};
}

template <typename Int>
Field agent_int(Int agent::AgentConfig::*m) {
  return {[m](const RunConfig& c) { return std::to_string(c.agent.*m); },
          [m](RunConfig& c, const std::string& k, std::string_view v) { c.agent.*m = parse_int<Int>(k, v); }};
}

Field agent_double(double agent::AgentConfig::*m) {
  return {[m](const RunConfig& c) { return fmt_double(c.agent.*m); },
          [m](RunConfig& c, const std::string& k, std::string_view v) { c.agent.*m = parse_double(k, v); }};
}

Field agent_bool(bool agent::AgentConfig::*m) {
  return {[m](const RunConfig& c) { return std::string(c.agent.*m ? "true" : "false"); },
          [m](RunConfig& c, const std::string& k, std::string_view v) { c.agent.*m = parse_bool(k, v); }};
}

Field double_field(double RunConfig::*m) {
  return {[m](const RunConfig& c) { return fmt_double(c.*m); },
          [m](RunConfig& c, const std::string& k, std::string_view v) { c.*m = parse_double(k, v); }};
}

Field bool_field(bool RunConfig::*m) {
  return {[m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); },
          [m](RunConfig& c, const std::string& k, std::string_view v) { c.*m = parse_bool(k, v); }};
}

Field list_field(std::vector<double> RunConfig::*m) {
  return {[m](const RunConfig& c) { return fmt_list(c.*m); },
          [m](RunConfig& c, const std::string& k, std::string_view v) { c.*m = parse_list(k, v); }};
}

Field activation_field(nn::Activation agent::AgentConfig::*m) {
  return {[m](const RunConfig& c) { return std::string(nn::to_string(c.agent.*m)); },
          [m](RunConfig& c, const std::string& k, std::string_view v) {
            try {
              c.agent.*m = nn::activation_from_string(v);
            } catch (const ConfigError&) {
              bad(k, v, "unknown activation");
            }
          }};
}

// Ordered, so to_text is stable.
const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["run.command"] = {[](const RunConfig& c) { return std::string(to_string(c.command)); },
                        [](RunConfig& c, const std::string& k, std::string_view v) {
                          try {
                            c.command = command_from_string(v);
                          } catch (const ConfigError&) {
                            bad(k, v, "unknown command");
                          }
                        }};
    t["run.env"] = {[](const RunConfig& c) { return c.env; },
                    [](RunConfig& c, const std::string& k, std::string_view v) {
                      if (v != "multigoal" && v != "pointmass") bad(k, v, "expected multigoal or pointmass");
                      c.env = v;
                    }};
    t["run.steps"] = int_field(&RunConfig::steps);
    t["run.eval_interval"] = int_field(&RunConfig::eval_interval);
    t["run.eval_episodes"] = int_field(&RunConfig::eval_episodes);
    t["run.trace_interval"] = int_field(&RunConfig::trace_interval);
    t["run.out"] = {[](const RunConfig& c) { return c.out.string(); },
                    [](RunConfig& c, const std::string&, std::string_view v) { c.out = std::string(v); }};
    t["run.stamp"] = bool_field(&RunConfig::stamp);
    t["run.seed"] = int_field(&RunConfig::seed);

    t["agent.batch"] = agent_int(&agent::AgentConfig::batch_size);
    t["agent.buffer"] = agent_int(&agent::AgentConfig::buffer_capacity);
    t["agent.actor_lr"] = agent_double(&agent::AgentConfig::actor_lr);
    t["agent.critic_lr"] = agent_double(&agent::AgentConfig::critic_lr);
    t["agent.alpha_lr"] = agent_double(&agent::AgentConfig::alpha_lr);
    t["agent.gamma"] = agent_double(&agent::AgentConfig::gamma);
    t["agent.energy_coeff"] = agent_double(&agent::AgentConfig::energy_coeff);
    t["agent.warmup"] = agent_int(&agent::AgentConfig::warmup_steps);
    t["agent.polyak"] = agent_double(&agent::AgentConfig::polyak);
    t["agent.utd"] = agent_int(&agent::AgentConfig::updates_per_step);
    t["agent.grad_clip"] = agent_double(&agent::AgentConfig::grad_clip);
    t["agent.auto_tune"] = agent_bool(&agent::AgentConfig::auto_tune);
    t["agent.alpha"] = agent_double(&agent::AgentConfig::alpha);
    t["agent.width"] = agent_int(&agent::AgentConfig::hidden_width);
    t["agent.actor_layers"] = agent_int(&agent::AgentConfig::actor_layers);
    t["agent.critic_layers"] = agent_int(&agent::AgentConfig::critic_layers);
    t["agent.actor_activation"] = activation_field(&agent::AgentConfig::actor_activation);
    t["agent.critic_activation"] = activation_field(&agent::AgentConfig::critic_activation);
    t["agent.parallel"] = agent_bool(&agent::AgentConfig::parallel);

    t["solver.steps"] = {[](const RunConfig& c) { return std::to_string(c.agent.solver.n_steps); },
                         [](RunConfig& c, const std::string& k, std::string_view v) {
                           c.agent.solver.n_steps = parse_int<int>(k, v);
                         }};
    t["solver.scheme"] = {[](const RunConfig& c) { return std::string(flow::to_string(c.agent.solver.scheme)); },
                          [](RunConfig& c, const std::string& k, std::string_view v) {
                            try {
                              c.agent.solver.scheme = flow::scheme_from_string(v);
                            } catch (const ConfigError&) {
                              bad(k, v, "expected euler or midpoint");
                            }
                          }};
    t["solver.sigma"] = {[](const RunConfig& c) { return fmt_double(c.agent.solver.sigma); },
                         [](RunConfig& c, const std::string& k, std::string_view v) {
                           c.agent.solver.sigma = parse_double(k, v);
                         }};
    t["solver.prior"] = {[](const RunConfig& c) { return std::string(flow::to_string(c.agent.solver.prior)); },
                         [](RunConfig& c, const std::string& k, std::string_view v) {
                           try {
                             c.agent.solver.prior = flow::prior_from_string(v);
                           } catch (const ConfigError&) {
                             bad(k, v, "expected uniform_box or standard_gaussian");
                           }
                         }};
    t["solver.action_bound"] = {[](const RunConfig& c) { return fmt_double(c.agent.solver.action_bound); },
                                [](RunConfig& c, const std::string& k, std::string_view v) {
                                  c.agent.solver.action_bound = parse_double(k, v);
                                }};

    t["toy.naive"] = bool_field(&RunConfig::toy_naive);
    t["toy.samples"] = int_field(&RunConfig::toy_samples);
    t["toy.snapshot_interval"] = int_field(&RunConfig::snapshot_interval);
    t["toy.svg"] = bool_field(&RunConfig::svg);
    t["toy.capture_radius"] = double_field(&RunConfig::capture_radius);
    t["toy.min_fraction"] = double_field(&RunConfig::min_fraction);

    t["ablate.grid"] = list_field(&RunConfig::grid);
    t["ablate.fixed_alpha"] = {[](const RunConfig& c) { return c.fixed_alpha ? fmt_double(*c.fixed_alpha) : "none"; },
                               [](RunConfig& c, const std::string& k, std::string_view v) {
                                 if (v == "none")
                                   c.fixed_alpha.reset();
                                 else
                                   c.fixed_alpha = parse_double(k, v);
                               }};

    t["check.paths"] = {[](const RunConfig& c) { return std::to_string(c.girsanov.n_paths); },
                        [](RunConfig& c, const std::string& k, std::string_view v) {
                          c.girsanov.n_paths = parse_int<int>(k, v);
                        }};
    t["check.steps"] = {[](const RunConfig& c) { return std::to_string(c.girsanov.n_steps); },
                        [](RunConfig& c, const std::string& k, std::string_view v) {
                          c.girsanov.n_steps = parse_int<int>(k, v);
                        }};
    t["check.wrong_sign"] = {[](const RunConfig& c) { return std::string(c.girsanov.wrong_sign ? "true" : "false"); },
                             [](RunConfig& c, const std::string& k, std::string_view v) {
                               c.girsanov.wrong_sign = parse_bool(k, v);
                             }};

    t["field.checkpoint"] = {[](const RunConfig& c) { return c.checkpoint.string(); },
                             [](RunConfig& c, const std::string&, std::string_view v) { c.checkpoint = std::string(v); }};
    t["field.taus"] = list_field(&RunConfig::taus);
    t["field.state"] = list_field(&RunConfig::field_state);
    t["field.min"] = {[](const RunConfig& c) { return fmt_double(c.field_grid.min); },
                      [](RunConfig& c, const std::string& k, std::string_view v) { c.field_grid.min = parse_double(k, v); }};
    t["field.max"] = {[](const RunConfig& c) { return fmt_double(c.field_grid.max); },
                      [](RunConfig& c, const std::string& k, std::string_view v) { c.field_grid.max = parse_double(k, v); }};
    t["field.resolution"] = {[](const RunConfig& c) { return std::to_string(c.field_grid.resolution); },
                             [](RunConfig& c, const std::string& k, std::string_view v) {
                               c.field_grid.resolution = parse_int<int>(k, v);
                             }};
    return t;
  }();
  return table;
}

using Pairs = std::vector<std::pair<std::string, std::string>>;

std::pair<std::string, std::string> split_pair(const std::string& line, const std::string& where) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError(where + ": expected key = value, got '" + line + "'");
  std::string key = trim(std::string_view(line).substr(0, eq));
  if (key.empty()) throw ConfigError(where + ": empty key");
  return {key, trim(std::string_view(line).substr(eq + 1))};
}

Pairs parse_text(const std::string& text) {
  Pairs out;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    out.push_back(split_pair(line, "config line " + std::to_string(n)));
  }
  return out;
}

void apply_pairs(RunConfig& cfg, const Pairs& pairs) {
  const auto& table = fields();
  for (const auto& [key, value] : pairs) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, key, value);
  }
}

std::optional<std::string> last_value(const Pairs& pairs, const std::string& key) {
  std::optional<std::string> v;
  for (const auto& [k, val] : pairs)
    if (k == key) v = val;
  return v;
}

// Settings of the 8-goal bandit experiment that differ from the benchmark defaults.
void toy_preset(RunConfig& c) {
  c.env = "multigoal";
  c.steps = 30000;
  c.agent.buffer_capacity = 100000;
  c.agent.hidden_width = 64;
  c.agent.solver.scheme = flow::Scheme::euler;
  c.agent.solver.n_steps = 24;
  c.agent.solver.sigma = 0.0;
  c.agent.solver.prior = flow::Prior::standard_gaussian;
  c.agent.solver.action_bound = flow::kUnbounded;
}

}  // namespace

void RunConfig::validate() const {
  agent.validate();
  if (steps < 0) throw ConfigError("config key 'run.steps': must be >= 0");
  if (eval_interval < 1) throw ConfigError("config key 'run.eval_interval': must be positive");
  if (eval_episodes < 1) throw ConfigError("config key 'run.eval_episodes': must be positive");
  if (trace_interval < 1) throw ConfigError("config key 'run.trace_interval': must be positive");
  if (toy_samples < 1) throw ConfigError("config key 'toy.samples': must be positive");
  if (snapshot_interval < 1) throw ConfigError("config key 'toy.snapshot_interval': must be positive");
  if (!(capture_radius > 0.0)) throw ConfigError("config key 'toy.capture_radius': must be > 0");
  if (!(min_fraction >= 0.0 && min_fraction <= 1.0)) throw ConfigError("config key 'toy.min_fraction': must lie in [0, 1]");
  if (command == Command::ablate && grid.empty()) throw ConfigError("config key 'ablate.grid': must not be empty");
  for (double c : grid)
    if (!(c >= 0.0)) throw ConfigError("config key 'ablate.grid': coefficients must be >= 0");
  if (fixed_alpha && !(*fixed_alpha >= 0.0)) throw ConfigError("config key 'ablate.fixed_alpha': must be >= 0");
  if (girsanov.n_paths < 2) throw ConfigError("config key 'check.paths': must be >= 2");
  if (girsanov.n_steps < 1) throw ConfigError("config key 'check.steps': must be positive");
  if (field_grid.resolution < 2 || !(field_grid.max > field_grid.min))
    throw ConfigError("config key 'field.resolution': grid needs resolution >= 2 and max > min");
  if (env == "multigoal" && agent.solver.prior == flow::Prior::uniform_box && !agent.solver.bounded())
    throw ConfigError("config key 'solver.prior': uniform_box needs a finite solver.action_bound");
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return to_text(a) == to_text(b); }

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& kv : fields()) keys.push_back(kv.first);
  return keys;
}

RunConfig load_config_text(const std::string& text, const std::vector<std::string>& overrides) {
  const Pairs file = parse_text(text);
  Pairs cli;
  for (const auto& o : overrides) cli.push_back(split_pair(o, "override '" + o + "'"));

  RunConfig cfg;
  auto command = last_value(cli, "run.command");
  if (!command) command = last_value(file, "run.command");
  if (command) apply_pairs(cfg, Pairs{{"run.command", *command}});
  auto env = last_value(cli, "run.env");
  if (!env) env = last_value(file, "run.env");
  if (!env && cfg.command == Command::toy) env = "multigoal";
  if (env) apply_pairs(cfg, Pairs{{"run.env", *env}});
  if (cfg.env == "multigoal") toy_preset(cfg);

  apply_pairs(cfg, file);
  apply_pairs(cfg, cli);
  cfg.agent.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return load_config_text(text, overrides);
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace flac::app
