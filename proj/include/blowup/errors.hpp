#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blowup {

/// Contract violations raised by the library. Each maps to exit code 2 in the CLI.
enum class ErrorCode {
  NotSuperlinear,
  OutOfRange,
  KellerOssermanFails,
  CapNotReached,
  BlowupInsideInterval,
  NonMonotonePerturbation,
  BadWindow,
  BadExponent,
  FixedPointDiverged,
  TemplateMismatch,
  NewtonStalled,
  NonConvergedGrid,
  DominationFailed,
  EllipticNonConverged,
  InsufficientDecade,
  SampleOnSingularSet,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a typed code and the offending parameter path (e.g. "forcing.p").
class ContractError : public std::runtime_error {
 public:
  ContractError(ErrorCode code, std::string parameter, const std::string& detail);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& parameter() const noexcept { return parameter_; }

 private:
  ErrorCode code_;
  std::string parameter_;
};

/// Throws ContractError(code, parameter, detail) unless `condition` holds.
void require(bool condition, ErrorCode code, std::string_view parameter, std::string_view detail);

}  // namespace blowup
