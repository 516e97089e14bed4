#include "blowup/errors.hpp"

namespace blowup {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotSuperlinear: return "NotSuperlinear";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::KellerOssermanFails: return "KellerOssermanFails";
    case ErrorCode::CapNotReached: return "CapNotReached";
    case ErrorCode::BlowupInsideInterval: return "BlowupInsideInterval";
    case ErrorCode::NonMonotonePerturbation: return "NonMonotonePerturbation";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::BadExponent: return "BadExponent";
    case ErrorCode::FixedPointDiverged: return "FixedPointDiverged";
    case ErrorCode::TemplateMismatch: return "TemplateMismatch";
    case ErrorCode::NewtonStalled: return "NewtonStalled";
    case ErrorCode::NonConvergedGrid: return "NonConvergedGrid";
    case ErrorCode::DominationFailed: return "DominationFailed";
    case ErrorCode::EllipticNonConverged: return "EllipticNonConverged";
    case ErrorCode::InsufficientDecade: return "InsufficientDecade";
    case ErrorCode::SampleOnSingularSet: return "SampleOnSingularSet";
  }
  return "Unknown";
}

ContractError::ContractError(ErrorCode code, std::string parameter, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + " [" + parameter + "]: " + detail),
      code_(code),
      parameter_(std::move(parameter)) {}

void require(bool condition, ErrorCode code, std::string_view parameter, std::string_view detail) {
  if (!condition) throw ContractError(code, std::string(parameter), std::string(detail));
}

}  // namespace blowup
