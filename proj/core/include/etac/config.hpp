#pragma once

#include <stdexcept>
#include <string>

#include "etac/harness.hpp"

namespace etac {

/// Config file problem, with the offending line for CLI diagnostics.
struct ConfigError : std::runtime_error {
  int line;
  ConfigError(int line_, const std::string& what)
      : std::runtime_error(what), line(line_) {}
};

/// Loads a sectioned key = value config file ([run], [model], [plant],
/// [triggers], [mpc], [adaptation], [train]); unspecified keys keep their
/// defaults. Unknown sections or keys are errors.
RunConfig load_run_config(const std::string& path);

}  // namespace etac
