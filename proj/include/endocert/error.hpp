#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace endocert {

enum class ErrorCode {
  kConfig,
  kMapFormat,
  kNoPreimageFound,
  kLambdaSearchExhausted,
  kDegenerateKernel,
  kRankZeroImage,
  kConeViolation,
  kNoReturnFound,
  kContractionStall,
  kNonIntegerDisplacement,
  kSelfIntersection,
  kBudgetExceeded,
  kBallOverlap,
  kWitnessInvalid,
  kGapTooLarge,
  kPreconditionUnmet,
};

std::string_view error_code_name(ErrorCode code);

/// Every module error carries a code and the name of the raising module so the
/// command-line front end can report "module: Code: detail".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& detail)
      : std::runtime_error(std::string(module) + ": " + std::string(error_code_name(code)) + ": " +
                           detail),
        code_(code),
        module_(std::move(module)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

}  // namespace endocert
