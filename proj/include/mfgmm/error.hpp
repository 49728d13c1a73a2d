#pragma once

#include <stdexcept>
#include <string>

namespace mfgmm {

// Process exit codes used by the CLI.
enum class ExitCode : int {
  Success = 0,
  ConfigError = 2,
  BudgetError = 3,
  NumericalFailure = 4,
};

class Error : public std::runtime_error {
public:
  Error(ExitCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}
  [[nodiscard]] ExitCode code() const noexcept { return code_; }

private:
  ExitCode code_;
};

/// Invalid input: violated type invariants, malformed files, schema errors.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string &what)
      : Error(ExitCode::ConfigError, what) {}
};

/// A requested enumeration or sweep exceeds its configured budget.
class BudgetError : public Error {
public:
  explicit BudgetError(const std::string &what)
      : Error(ExitCode::BudgetError, what) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string &what)
      : Error(ExitCode::NumericalFailure, what) {}
};

} // namespace mfgmm
