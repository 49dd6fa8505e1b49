#pragma once

#include <stdexcept>
#include <string>

namespace bt {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NonPositiveMarginal,
  GlobalFeasibilityViolation,
  NonPositiveCoefficient,
  NonFiniteEntry,
  Overflow,
  NonPositiveWeight,
  NonPositiveScale,
  NonPositiveEntry,
  NumericalDegeneracy,
  NonFinite,
  MaxItersExceeded,
  DivisionDegeneracy,
  ZeroLine,
  RootBracketFailure,
  LengthMismatch,
  InconsistentSupport,
  SizeGuardExceeded,
  ZeroMarginal,
  ParseError,
  IoError,
};

const char* to_string(ErrorCode code);

// All library failures are reported through this type; code() identifies
// which invariant or precondition was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bt
