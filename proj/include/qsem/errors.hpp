#pragma once

#include <stdexcept>
#include <string>

namespace qsem {

// Configuration and input parsing problems (CLI exit code 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem problems (CLI exit code 3).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qsem
