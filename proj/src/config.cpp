#include "evorl/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace evorl {

namespace {

struct RegistryRow {
  const char* key;
  Config::Type type;
  const char* def;
  const char* doc;
};

using T = Config::Type;

// The full key registry. Defaults follow the published per-algorithm tables;
// unusual values are documented inline.
const RegistryRow kRegistry[] = {
    {"workflow", T::String, "es", "one of es, ppo, td3, erl, cemrl, pbt, pbt-cso"},
    {"seed", T::Int, "0", "root RNG seed; determines the whole run"},
    {"out_dir", T::String, "out", "directory for metrics, timings and checkpoints"},
    {"env.id", T::String, "cartpole", "cartpole | pendulum"},
    {"env.fixed_horizon", T::Bool, "false", "suppress termination; episodes end at the horizon"},
    {"env.max_episode_steps", T::Int, "0", "0 = env default (cartpole 500, pendulum 200)"},
    {"exec.workers", T::Int, "0", "worker threads; 0 = all hardware cores"},
    {"net.hidden", T::String, "64,64", "comma-separated hidden layer widths"},
    {"net.layer_norm", T::Bool, "false", "layer norm on hidden layers"},
    {"budget.iterations", T::Int, "2000", "stop after this many workflow iterations (0 = off)"},
    {"budget.episodes", T::Int, "0", "stop once this many training episodes finished (0 = off)"},
    {"budget.env_steps", T::Int, "0", "stop once this many env steps collected (0 = off)"},
    {"eval.interval", T::Int, "10", "evaluate every k iterations (0 = never)"},
    {"eval.episodes", T::Int, "128", "episodes per evaluation"},
    {"checkpoint.interval", T::Int, "0", "checkpoint every k iterations (0 = final only)"},
    {"obs_norm.mode", T::String, "auto",
     "auto | none | vbn | running_stats; auto follows the algorithm's table"},
    {"obs_norm.vbn_samples", T::Int, "10000", "random timesteps fitted once for vbn"},
    {"ec.algo", T::String, "openes", "openes | ars | ves | cmaes | cem"},
    {"ec.pop", T::Int, "128", "population size"},
    {"ec.fitness_episodes", T::Int, "1", "episodes averaged into one fitness value"},
    {"ec.openes.sigma", T::Double, "0.02", "perturbation std"},
    {"ec.openes.lr", T::Double, "0.01", "Adam step size"},
    {"ec.openes.weight_decay", T::Double, "0.005", "decoupled weight decay"},
    {"ec.openes.mirrored", T::Bool, "true", "antithetic +/- perturbation pairs"},
    {"ec.openes.noise_table", T::Bool, "false", "draw perturbations from a pre-built table"},
    {"ec.openes.noise_table_size", T::Int, "4194304", "entries in the shared noise table"},
    {"ec.ars.sigma", T::Double, "0.03", "perturbation std"},
    {"ec.ars.lr", T::Double, "0.02", "SGD step size"},
    {"ec.ars.elites", T::Int, "16", "top directions kept (b)"},
    {"ec.ves.sigma", T::Double, "0.02", "perturbation std"},
    {"ec.ves.elites", T::Int, "16", "recombination parents (mu)"},
    {"ec.ves.mirrored", T::Bool, "true", "antithetic +/- perturbation pairs"},
    {"ec.cmaes.sigma0", T::Double, "0.1", "initial step size"},
    {"ec.cmaes.elites", T::Int, "64", "recombination parents (mu)"},
    {"ec.cmaes.max_dim", T::Int, "4096", "refuse the dense covariance beyond this dim"},
    {"ec.cem.elites", T::Int, "5", "elite count refitting the distribution"},
    {"ec.cem.var_init", T::Double, "1e-3", "initial diagonal variance"},
    {"ec.cem.noise_start", T::Double, "1e-3", "variance floor at iteration 0"},
    {"ec.cem.noise_end", T::Double, "1e-5", "variance floor after decay_iters"},
    {"ec.cem.decay_iters", T::Int, "2000", "exponential floor decay horizon"},
    {"rl.gamma", T::Double, "0.99", "discount factor"},
    {"ppo.lr", T::Double, "3e-4", "Adam step size (actor and critic)"},
    {"ppo.clip_eps", T::Double, "0.2", "surrogate clip range"},
    {"ppo.gae_lambda", T::Double, "0.95", "GAE factor"},
    {"ppo.actor_weight", T::Double, "1.0", "surrogate loss weight"},
    {"ppo.critic_weight", T::Double, "0.5", "value loss weight"},
    {"ppo.entropy_weight", T::Double, "-0.01", "entropy loss weight (negative = bonus)"},
    {"ppo.epochs", T::Int, "4", "passes over each iteration's batch"},
    {"ppo.minibatch_size", T::Int, "256", "rows per gradient step"},
    {"ppo.timesteps_per_iter", T::Int, "2048", "transitions collected per iteration"},
    {"ppo.num_envs", T::Int, "4", "parallel rollout lanes"},
    {"ppo.max_grad_norm", T::Double, "10", "joint actor+critic gradient norm clip"},
    {"td3.lr", T::Double, "3e-4", "Adam step size (actor and critics)"},
    {"td3.batch_size", T::Int, "256", "replay minibatch size"},
    {"td3.tau", T::Double, "0.005", "target soft-update ratio"},
    {"td3.policy_noise", T::Double, "0.2", "target action smoothing std"},
    {"td3.noise_clip", T::Double, "0.5", "smoothing noise clip"},
    {"td3.exploration_noise", T::Double, "0.1", "Gaussian action noise std during rollouts"},
    {"td3.actor_update_interval", T::Int, "2", "critic updates per actor update (standalone)"},
    {"td3.buffer_capacity", T::Int, "1000000", "replay ring size (shared by erl/cemrl)"},
    {"td3.random_timesteps", T::Int, "1000",
     "uniform-random warmup steps before updates (standalone; table is silent)"},
    {"td3.rollout_steps", T::Int, "2", "timesteps sampled per standalone iteration"},
    {"td3.updates_per_iter", T::Int, "2", "critic updates per standalone iteration"},
    {"erl.pop", T::Int, "10", "population size"},
    {"erl.elites", T::Int, "1", "members copied unchanged each generation"},
    {"erl.tournament_k", T::Int, "3", "tournament size for parent selection"},
    {"erl.mutation_prob", T::Double, "0.1", "per-coordinate mutation probability"},
    {"erl.mutation_std", T::Double, "0.1", "mutation noise std"},
    {"erl.fitness_episodes", T::Int, "1", "episodes per member per generation"},
    {"erl.warmup_iters", T::Int, "10", "generations without RL updates or actor sync"},
    {"erl.sync_period", T::Int, "1", "generations between RL-actor injections"},
    {"erl.rl_mode", T::String, "aligned",
     "aligned: updates = timesteps sampled this generation; fixed: constant per generation"},
    {"erl.fixed_updates", T::Int, "4096", "updates per generation in fixed mode"},
    {"erl.actor_update_interval", T::Int, "1", "shared-critic convention: no actor delay"},
    {"erl.random_timesteps", T::Int, "0", "uniform-random transitions prefilled at init"},
    {"cemrl.pop", T::Int, "10", "population size"},
    {"cemrl.elites", T::Int, "5", "CEM elites"},
    {"cemrl.rl_agents", T::Int, "5", "candidates receiving RL updates each iteration"},
    {"cemrl.fitness_episodes", T::Int, "1", "episodes per candidate per iteration"},
    {"cemrl.warmup_iters", T::Int, "10", "iterations without RL updates"},
    {"cemrl.random_timesteps", T::Int, "25600", "uniform-random transitions prefilled at init"},
    {"cemrl.rl_mode", T::String, "aligned",
     "aligned: updates = timesteps sampled last iteration; fixed: constant per iteration"},
    {"cemrl.fixed_updates", T::Int, "4096", "updates per iteration in fixed mode"},
    {"pbt.pop", T::Int, "128", "population of inner workflows"},
    {"pbt.inner", T::String, "ppo", "inner workflow id"},
    {"pbt.steps_per_iter", T::Int, "64", "inner workflow steps per meta-iteration"},
    {"pbt.perturb", T::Double, "0.2", "explore multiplies hypers by 1 +/- this"},
    {"pbt.selection_ratio", T::Double, "0.2", "bottom/top fraction swapped by exploit"},
    {"pbt.meta_episodes", T::Int, "16", "episodes per meta-objective evaluation"},
    {"pbt.warmup_steps", T::Int, "256", "inner steps before the first exploit"},
    {"pbt.cso_per_coordinate", T::Bool, "true",
     "draw r1,r2 per hyperparameter (false: one pair per member pair)"},
};

constexpr const char* kSearchPrefix = "pbt.search.";

bool is_search_key(const std::string& key) {
  if (key.rfind(kSearchPrefix, 0) != 0 || key.size() == std::string(kSearchPrefix).size())
    return false;
  for (std::size_t i = std::string(kSearchPrefix).size(); i < key.size(); ++i) {
    const char c = key[i];
    if (!(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
          c == '_'))
      return false;
  }
  return true;
}

bool parse_int(const std::string& text, std::int64_t& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  out = std::strtoll(text.c_str(), &end, 10);
  return end == text.c_str() + text.size();
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size();
}

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::defaults() {
  Config cfg;
  for (const RegistryRow& row : kRegistry) cfg.entries_[row.key] = {row.type, row.def};
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  Type type;
  if (it != entries_.end()) {
    type = it->second.type;
  } else if (is_search_key(key)) {
    type = Type::String;
  } else {
    throw ConfigError("unknown config key: '" + key + "'");
  }
  std::string text = value;
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"')
    text = text.substr(1, text.size() - 2);
  std::int64_t i;
  double d;
  switch (type) {
    case Type::Int:
      if (!parse_int(text, i)) throw ConfigError("key '" + key + "': expected integer, got '" + text + "'");
      break;
    case Type::Double:
      if (!parse_double(text, d)) throw ConfigError("key '" + key + "': expected number, got '" + text + "'");
      break;
    case Type::Bool:
      if (text != "true" && text != "false")
        throw ConfigError("key '" + key + "': expected true/false, got '" + text + "'");
      break;
    case Type::String:
      break;
  }
  entries_[key] = {type, text};
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Config cfg = defaults();
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments outside quotes
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = strip(line);
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = strip(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + ": expected key = value");
    if (!section.empty()) key = section + "." + key;
    const bool quoted_value = value.size() >= 2 && value.front() == '"' && value.back() == '"';
    auto it = cfg.entries_.find(key);
    const Type type = it != cfg.entries_.end()
                          ? it->second.type
                          : (is_search_key(key) ? Type::String
                                                : throw ConfigError(where + ": unknown config key: '" +
                                                                    key + "'"));
    if (type == Type::String && !quoted_value)
      throw ConfigError(where + ": key '" + key + "' takes a quoted string");
    if (type != Type::String && quoted_value)
      throw ConfigError(where + ": key '" + key + "' takes an unquoted " +
                        (type == Type::Bool ? "boolean" : "number"));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cfg;
}

std::int64_t Config::get_int(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key: '" + key + "'");
  std::int64_t v;
  if (!parse_int(it->second.value, v))
    throw ConfigError("key '" + key + "' is not an integer: '" + it->second.value + "'");
  return v;
}

double Config::get_double(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key: '" + key + "'");
  double v;
  if (!parse_double(it->second.value, v))
    throw ConfigError("key '" + key + "' is not a number: '" + it->second.value + "'");
  return v;
}

bool Config::get_bool(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key: '" + key + "'");
  return it->second.value == "true";
}

const std::string& Config::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key: '" + key + "'");
  return it->second.value;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  const std::string& text = get_string(key);
  std::vector<int> out;
  if (strip(text).empty()) return out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::int64_t v;
    if (!parse_int(strip(part), v))
      throw ConfigError("key '" + key + "': bad list entry '" + part + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> Config::prefixed(const std::string& prefix) const {
  std::vector<std::pair<std::string, std::string>> out;
  const std::string full = prefix + ".";
  for (auto it = entries_.lower_bound(full); it != entries_.end(); ++it) {
    if (it->first.rfind(full, 0) != 0) break;
    out.emplace_back(it->first.substr(full.size()), it->second.value);
  }
  return out;
}

std::string Config::describe() const {
  std::string out;
  for (const auto& [key, entry] : entries_) {
    out += key;
    out += '=';
    out += entry.value;
    out += '\n';
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> Config::documented_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const RegistryRow& row : kRegistry)
    out.emplace_back(row.key, std::string(row.doc) + " (default: " + row.def + ")");
  out.emplace_back(std::string(kSearchPrefix) + "<hyper>",
                   "PBT search range \"low,high,scale\"; scale: linear|log");
  return out;
}

}  // namespace evorl
