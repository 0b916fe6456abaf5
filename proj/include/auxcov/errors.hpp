#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace auxcov {

enum class ErrorCode {
  // input / configuration
  kEmptyUnion,
  kBadCounts,
  kIndexOutOfRange,
  kParseError,
  kInconsistentColumns,
  kNoObservations,
  kNoAuxCoverage,
  kDimensionMismatch,
  kConfigOutOfRange,
  kBadGamma,
  kUnachievableEta,
  kFoldTooSmall,
  kGridEmpty,
  kNotObserved,
  kDomainError,
  kIoError,
  // numerical
  kDegeneratePair,
  kZeroVariance,
  kNotSymmetric,
  kNonpositiveDiagonal,
  kRankDeficient,
  kTooFewPoints,
  kNonPSDPhi,
  kSingularSigma,
  kMissingMomentEntry,
  kTooLarge,
  kAllFoldsDegenerate,
  kReplicateFailure,
  kNonPDBlock,
  kNoPDCompletion,
  kNotConverged,
  kSingularEstimate,
};

std::string_view error_name(ErrorCode code);

// Input errors map to CLI exit code 2, numerical failures to 3.
bool is_input_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace auxcov
