#pragma once

#include <stdexcept>
#include <string>

namespace rollopt {

// Configuration / schema problem. `path` is the offending field, dotted
// (e.g. "fingers[1].joints[0].axis"); the CLI turns these into exit code 2.
struct ConfigError : std::runtime_error {
  ConfigError(std::string field_path, const std::string& what)
      : std::runtime_error(field_path + ": " + what), path(std::move(field_path)) {}
  std::string path;
};

}  // namespace rollopt
