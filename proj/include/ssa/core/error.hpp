#pragma once

#include <stdexcept>
#include <string>

namespace ssa {

/// Category of a failure, used by the CLI to pick an exit code.
enum class ErrorKind {
  invalid_argument,
  invalid_data,
  fit_failure,
  simulation_infeasible,
  numerically_degenerate,
  insufficient_data,
  no_plausible_model,
  config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_data: return "invalid-data";
    case ErrorKind::fit_failure: return "fit-failure";
    case ErrorKind::simulation_infeasible: return "simulation-infeasible";
    case ErrorKind::numerically_degenerate: return "numerically-degenerate";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::no_plausible_model: return "no-plausible-model";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace ssa
