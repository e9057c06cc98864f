#include "bdt/error.hpp"

namespace bdt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonIncreasingTau: return "NonIncreasingTau";
    case ErrorCode::TauOutOfRange: return "TauOutOfRange";
    case ErrorCode::InvalidOffspring: return "InvalidOffspring";
    case ErrorCode::InvalidHorizon: return "InvalidHorizon";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EqualBranches: return "EqualBranches";
    case ErrorCode::DegenerateTree: return "DegenerateTree";
    case ErrorCode::NonPositiveHorizon: return "NonPositiveHorizon";
    case ErrorCode::BadArguments: return "BadArguments";
    case ErrorCode::MismatchedConstant: return "MismatchedConstant";
    case ErrorCode::ZeroAtomProbability: return "ZeroAtomProbability";
    case ErrorCode::MismatchedHorizon: return "MismatchedHorizon";
    case ErrorCode::UnsupportedEvent: return "UnsupportedEvent";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::AllNonpositiveConstraint: return "AllNonpositiveConstraint";
    case ErrorCode::AntichainTooLarge: return "AntichainTooLarge";
    case ErrorCode::NoConvergence: return "NoConvergence";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::AllNonpositiveConstraint:
    case ErrorCode::AntichainTooLarge:
    case ErrorCode::NoConvergence:
      return false;
    default:
      return true;
  }
}

}  // namespace bdt
