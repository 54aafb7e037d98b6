#include "warmopf/error.hpp"

namespace warmopf {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingBlock: return "MissingBlock";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::UnsupportedCostModel: return "UnsupportedCostModel";
    case ErrorCode::NoSlackBus: return "NoSlackBus";
    case ErrorCode::MultipleSlackBuses: return "MultipleSlackBuses";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::ZeroImpedanceBranch: return "ZeroImpedanceBranch";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::SanityGateFailed: return "SanityGateFailed";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingBlock:
    case ErrorCode::MalformedRow:
    case ErrorCode::DanglingReference:
    case ErrorCode::UnsupportedCostModel:
    case ErrorCode::NoSlackBus:
    case ErrorCode::MultipleSlackBuses:
    case ErrorCode::InvalidValue:
      return 3;
    case ErrorCode::ZeroImpedanceBranch:
    case ErrorCode::Disconnected:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::SingularJacobian:
    case ErrorCode::NumericalFailure:
    case ErrorCode::Infeasible:
      return 4;
    case ErrorCode::SchemaMismatch:
    case ErrorCode::LengthMismatch:
    case ErrorCode::SchemaVersionMismatch:
      return 5;
    case ErrorCode::IoError:
    case ErrorCode::ChecksumMismatch:
      return 6;
    case ErrorCode::EmptyInput:
    case ErrorCode::BudgetExhausted:
    case ErrorCode::SanityGateFailed:
      return 7;
  }
  return 1;
}

}  // namespace warmopf
