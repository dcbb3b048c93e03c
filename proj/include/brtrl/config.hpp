#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace brtrl {

// Every key the config system accepts. `default_value` is nullptr for keys
// with no default (required per mode, or resolved per environment).
struct KeySpec {
  enum class Kind { Int, Uint, Real, Str };
  const char* name;
  Kind kind;
  const char* default_value;  // nullptr = no static default
  const char* help;
};

const std::vector<KeySpec>& config_registry();

// Fully resolved run configuration: registry defaults, then the config file,
// then flag overrides (flags win), then environment-dependent defaults for
// still-unset keys. Every stored value is validated against its key's kind.
class ExperimentConfig {
 public:
  static ExperimentConfig resolve(const std::string& mode,
                                  const std::optional<std::string>& config_path,
                                  const std::vector<std::pair<std::string, std::string>>& flags);

  const std::string& mode() const { return mode_; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Typed getters; errors name the key. The plain getters throw when the key
  // is unset (used for per-mode required keys).
  std::string get_string(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_real(const std::string& key) const;
  long long get_int_min(const std::string& key, long long min) const;
  double get_real_range(const std::string& key, double lo, double hi) const;

  // Sorted `key = value` lines; re-parseable by resolve().
  void echo(std::ostream& out) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::string mode_;
  std::map<std::string, std::string> values_;
};

// Parses flat `key = value` lines ('#' starts a comment; blank lines ignored).
// Unknown keys are rejected by name.
std::map<std::string, std::string> parse_config_text(std::istream& in);

}  // namespace brtrl
