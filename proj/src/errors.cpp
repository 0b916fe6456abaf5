#include "auxcov/errors.hpp"

namespace auxcov {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyUnion: return "EmptyUnion";
    case ErrorCode::kBadCounts: return "BadCounts";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInconsistentColumns: return "InconsistentColumns";
    case ErrorCode::kNoObservations: return "NoObservations";
    case ErrorCode::kNoAuxCoverage: return "NoAuxCoverage";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kConfigOutOfRange: return "ConfigOutOfRange";
    case ErrorCode::kBadGamma: return "BadGamma";
    case ErrorCode::kUnachievableEta: return "UnachievableEta";
    case ErrorCode::kFoldTooSmall: return "FoldTooSmall";
    case ErrorCode::kGridEmpty: return "GridEmpty";
    case ErrorCode::kNotObserved: return "NotObserved";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kDegeneratePair: return "DegeneratePair";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kNonpositiveDiagonal: return "NonpositiveDiagonal";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kNonPSDPhi: return "NonPSDPhi";
    case ErrorCode::kSingularSigma: return "SingularSigma";
    case ErrorCode::kMissingMomentEntry: return "MissingMomentEntry";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kAllFoldsDegenerate: return "AllFoldsDegenerate";
    case ErrorCode::kReplicateFailure: return "ReplicateFailure";
    case ErrorCode::kNonPDBlock: return "NonPDBlock";
    case ErrorCode::kNoPDCompletion: return "NoPDCompletion";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kSingularEstimate: return "SingularEstimate";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) {
  return static_cast<int>(code) < static_cast<int>(ErrorCode::kDegeneratePair);
}

}  // namespace auxcov
