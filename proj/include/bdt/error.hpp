#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bdt {

enum class ErrorCode {
  // input validation
  NonIncreasingTau,
  TauOutOfRange,
  InvalidOffspring,
  InvalidHorizon,
  IndexOutOfRange,
  EqualBranches,
  DegenerateTree,
  NonPositiveHorizon,
  BadArguments,
  MismatchedConstant,
  ZeroAtomProbability,
  MismatchedHorizon,
  UnsupportedEvent,
  ParseError,
  // numerical failures
  NotPositiveDefinite,
  AllNonpositiveConstraint,
  AntichainTooLarge,
  NoConvergence,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for codes caused by bad user input rather than a numerical failure.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bdt
