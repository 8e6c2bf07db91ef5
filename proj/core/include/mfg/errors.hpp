#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfg {

enum class ErrorCode {
  InvalidArgument,
  InvalidDistribution,
  ShapeMismatch,
  EmptyActionSet,
  KernelNotStochastic,
  GeneratorRowSum,
  NegativeRate,
  ModeMismatch,
  NonFiniteValue,
  UnknownProtocol,
  StepUnstable,
  Overflow,
  TooLarge,
  GridMismatch,
  DriftGeneratorMismatch,
  StateTooLarge,
  OffSimplexStep,
  KernelProbeFailure,
  InsufficientReplications,
  InvalidProbability,
  NumericalBlowup,
  StepInvalid,
  NonIntegrable,
  ConfigParseError,
  UnknownSubcommand,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every recoverable failure in the library is reported as an mfg::Error.
/// The code identifies the contract that was violated; what() carries a
/// human-readable diagnostic (field names, offending indices).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace mfg
