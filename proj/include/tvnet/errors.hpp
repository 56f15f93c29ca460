#pragma once

#include <stdexcept>

namespace tvnet {

// Error families the CLI maps to distinct exit codes: config/usage problems,
// broken or missing data, and everything else (runtime).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tvnet
