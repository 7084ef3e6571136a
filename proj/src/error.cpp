#include <endocert/error.hpp>

namespace endocert {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kMapFormat: return "MapFormatError";
    case ErrorCode::kNoPreimageFound: return "NoPreimageFound";
    case ErrorCode::kLambdaSearchExhausted: return "LambdaSearchExhausted";
    case ErrorCode::kDegenerateKernel: return "DegenerateKernel";
    case ErrorCode::kRankZeroImage: return "RankZeroImage";
    case ErrorCode::kConeViolation: return "ConeViolation";
    case ErrorCode::kNoReturnFound: return "NoReturnFound";
    case ErrorCode::kContractionStall: return "ContractionStall";
    case ErrorCode::kNonIntegerDisplacement: return "NonIntegerDisplacement";
    case ErrorCode::kSelfIntersection: return "SelfIntersection";
    case ErrorCode::kBudgetExceeded: return "BudgetExceeded";
    case ErrorCode::kBallOverlap: return "BallOverlap";
    case ErrorCode::kWitnessInvalid: return "WitnessInvalid";
    case ErrorCode::kGapTooLarge: return "GapTooLarge";
    case ErrorCode::kPreconditionUnmet: return "PreconditionUnmet";
  }
  return "UnknownError";
}

}  // namespace endocert
