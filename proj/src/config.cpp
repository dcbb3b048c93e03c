#include "brtrl/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "brtrl/errors.hpp"
#include "brtrl/trees.hpp"  // parse_double

namespace brtrl {

const std::vector<KeySpec>& config_registry() {
  using Kind = KeySpec::Kind;
  static const std::vector<KeySpec> registry = {
      {"mode", Kind::Str, nullptr, "informational; must match the subcommand when set"},
      {"environment", Kind::Str, nullptr, "cartpole | mountaincar (required by most modes)"},
      {"seed", Kind::Uint, "1", "master seed; every stream is derived from it"},
      {"out", Kind::Str, nullptr, "output directory (default: $BRTRL_OUT or ./out)"},
      {"model", Kind::Str, nullptr, "model file path (collect/distill/evaluate/export-tree)"},
      {"data", Kind::Str, nullptr, "dataset CSV path (distill)"},
      {"input", Kind::Str, nullptr, "curve CSV path (plot)"},
      {"teacher.episodes", Kind::Int, nullptr, "SARSA episodes (default 10000 cartpole, 5000 mountaincar)"},
      {"teacher.alpha", Kind::Real, "0.3", "SARSA step size"},
      {"teacher.gamma", Kind::Real, nullptr, "SARSA discount (default 0.99 cartpole, 1 mountaincar)"},
      {"teacher.epsilon_start", Kind::Real, "0.1", "initial exploration rate"},
      {"teacher.epsilon_end", Kind::Real, "0.01", "final exploration rate (linear decay)"},
      {"teacher.tilings", Kind::Int, "8", "number of tilings"},
      {"teacher.tiles", Kind::Int, "8", "tiles per dimension"},
      {"collect.episodes", Kind::Int, "200", "greedy rollout episodes to record"},
      {"gbm.rounds", Kind::Int, "30", "boosting rounds (trees per action)"},
      {"gbm.shrinkage", Kind::Real, "0.3", "learning rate on tree outputs"},
      {"gbm.max_depth", Kind::Int, "3", "student tree depth cap"},
      {"gbm.min_samples_leaf", Kind::Int, "1", "minimum samples per leaf"},
      {"gbm.min_samples_split", Kind::Int, "2", "minimum samples to split"},
      {"distill.holdout", Kind::Real, "0.2", "held-out episode fraction for fidelity"},
      {"eval.episodes", Kind::Int, "100", "greedy evaluation episodes"},
      {"pg.batch_episodes", Kind::Int, "100", "episodes per policy-gradient batch"},
      {"pg.gamma", Kind::Real, "0.99", "discount for returns"},
      {"pg.batches", Kind::Int, "100", "boosting rounds (one tree group each)"},
      {"pg.eta", Kind::Real, "0.1", "policy learning rate (scales tree outputs)"},
      {"pg.beta", Kind::Real, "0.5", "baseline learning rate"},
      {"pg.max_depth", Kind::Int, "3", "policy/baseline tree depth cap"},
      {"pg.capacity", Kind::Int, "40", "ensemble group cap (pg-recycled)"},
      {"pg.lambda", Kind::Real, "0.5", "recycled-contribution blend"},
      {"tree.index", Kind::Int, "0", "tree to export, in model-file order"},
      {"plot.window", Kind::Int, "100", "moving-average window"},
  };
  return registry;
}

namespace {

const KeySpec* find_key(const std::string& name) {
  for (const KeySpec& spec : config_registry()) {
    if (name == spec.name) return &spec;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

long long parse_int_token(const std::string& key, const std::string& value) {
  long long out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_uint_token(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + value +
                      "'");
  }
  return out;
}

double parse_real_token(const std::string& key, const std::string& value) {
  try {
    return parse_double(value);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a real number, got '" + value + "'");
  }
}

void validate_kind(const std::string& key, KeySpec::Kind kind, const std::string& value) {
  if (value.empty()) throw ConfigError("config key '" + key + "': empty value");
  switch (kind) {
    case KeySpec::Kind::Int: parse_int_token(key, value); break;
    case KeySpec::Kind::Uint: parse_uint_token(key, value); break;
    case KeySpec::Kind::Real: parse_real_token(key, value); break;
    case KeySpec::Kind::Str: break;
  }
}

}  // namespace

std::map<std::string, std::string> parse_config_text(std::istream& in) {
  std::map<std::string, std::string> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (find_key(key) == nullptr) throw ConfigError("unknown config key '" + key + "'");
    if (value.empty()) throw ConfigError("config key '" + key + "': empty value");
    values[key] = value;
  }
  return values;
}

ExperimentConfig ExperimentConfig::resolve(
    const std::string& mode, const std::optional<std::string>& config_path,
    const std::vector<std::pair<std::string, std::string>>& flags) {
  ExperimentConfig config;
  config.mode_ = mode;

  for (const KeySpec& spec : config_registry()) {
    if (spec.default_value != nullptr) config.values_[spec.name] = spec.default_value;
  }
  if (config_path.has_value()) {
    std::ifstream file(*config_path);
    if (!file) throw IoError("cannot open config file '" + *config_path + "'");
    for (const auto& [key, value] : parse_config_text(file)) config.values_[key] = value;
  }
  for (const auto& [key, value] : flags) {
    if (find_key(key) == nullptr) throw ConfigError("unknown config key '" + key + "'");
    if (value.empty()) throw ConfigError("config key '" + key + "': empty value");
    config.values_[key] = value;
  }

  // Environment-dependent defaults for keys still unset.
  const auto env_it = config.values_.find("environment");
  if (env_it != config.values_.end()) {
    const bool cartpole = env_it->second == "cartpole";
    if (config.values_.count("teacher.episodes") == 0) {
      config.values_["teacher.episodes"] = cartpole ? "10000" : "5000";
    }
    if (config.values_.count("teacher.gamma") == 0) {
      config.values_["teacher.gamma"] = cartpole ? "0.99" : "1";
    }
  }
  if (config.values_.count("out") == 0) {
    const char* env_out = std::getenv("BRTRL_OUT");
    config.values_["out"] = env_out != nullptr && *env_out != '\0' ? env_out : "out";
  }

  if (config.values_.count("mode") != 0 && config.values_["mode"] != mode) {
    throw ConfigError("config key 'mode' (= " + config.values_["mode"] +
                      ") conflicts with subcommand '" + mode + "'");
  }
  config.values_["mode"] = mode;

  for (const auto& [key, value] : config.values_) {
    validate_kind(key, find_key(key)->kind, value);
  }
  return config;
}

std::string ExperimentConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError("missing required config key '" + key + "' for mode '" + mode_ + "'");
  }
  return it->second;
}

long long ExperimentConfig::get_int(const std::string& key) const {
  return parse_int_token(key, get_string(key));
}

std::uint64_t ExperimentConfig::get_uint(const std::string& key) const {
  return parse_uint_token(key, get_string(key));
}

double ExperimentConfig::get_real(const std::string& key) const {
  return parse_real_token(key, get_string(key));
}

long long ExperimentConfig::get_int_min(const std::string& key, long long min) const {
  const long long v = get_int(key);
  if (v < min) {
    throw ConfigError("config key '" + key + "': must be >= " + std::to_string(min) + ", got " +
                      std::to_string(v));
  }
  return v;
}

double ExperimentConfig::get_real_range(const std::string& key, double lo, double hi) const {
  const double v = get_real(key);
  if (!(v >= lo) || !(v <= hi)) {
    std::ostringstream msg;
    msg << "config key '" << key << "': must lie in [" << lo << ", " << hi << "], got "
        << get_string(key);
    throw ConfigError(msg.str());
  }
  return v;
}

void ExperimentConfig::echo(std::ostream& out) const {
  for (const auto& [key, value] : values_) {
    out << key << " = " << value << "\n";
  }
}

}  // namespace brtrl
