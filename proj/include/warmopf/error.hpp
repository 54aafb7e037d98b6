#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace warmopf {

enum class ErrorCode {
  // case file
  MissingBlock,
  MalformedRow,
  DanglingReference,
  UnsupportedCostModel,
  NoSlackBus,
  MultipleSlackBuses,
  InvalidValue,
  // network / numerics
  ZeroImpedanceBranch,
  Disconnected,
  DimensionMismatch,
  SingularJacobian,
  NumericalFailure,
  Infeasible,
  // schemas
  SchemaMismatch,
  LengthMismatch,
  SchemaVersionMismatch,
  // files
  IoError,
  ChecksumMismatch,
  // data generation / learning
  EmptyInput,
  BudgetExhausted,
  SanityGateFailed,
};

std::string_view error_code_name(ErrorCode code);

/// Process exit code for an error family (see README, "Exit codes").
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace warmopf
