#pragma once

#include <stdexcept>
#include <string>

namespace brtrl {

// Bad or missing configuration (unknown key, invalid value, bad model header).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures (unreadable input, unwritable output directory).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violations (invalid argument, stepping a finished environment)
// are reported as std::invalid_argument / std::logic_error.

}  // namespace brtrl
