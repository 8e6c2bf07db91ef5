#include "mfg/errors.hpp"

namespace mfg {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyActionSet: return "EmptyActionSet";
    case ErrorCode::KernelNotStochastic: return "KernelNotStochastic";
    case ErrorCode::GeneratorRowSum: return "GeneratorRowSum";
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::UnknownProtocol: return "UnknownProtocol";
    case ErrorCode::StepUnstable: return "StepUnstable";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DriftGeneratorMismatch: return "DriftGeneratorMismatch";
    case ErrorCode::StateTooLarge: return "StateTooLarge";
    case ErrorCode::OffSimplexStep: return "OffSimplexStep";
    case ErrorCode::KernelProbeFailure: return "KernelProbeFailure";
    case ErrorCode::InsufficientReplications: return "InsufficientReplications";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::NumericalBlowup: return "NumericalBlowup";
    case ErrorCode::StepInvalid: return "StepInvalid";
    case ErrorCode::NonIntegrable: return "NonIntegrable";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
    case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace mfg
