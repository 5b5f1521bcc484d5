#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace contrabias {

enum class ErrorCode {
  kInvalidArgument,
  kIoError,
  // corpus
  kMissingField,
  kUnknownCategory,
  kUnknownLabel,
  kEmptyCorpus,
  kMaskTokenMissing,
  kTooFewContexts,
  // embedder
  kBackendUnavailable,
  kTokenizationFailure,
  kZeroVector,
  kDimensionMismatch,
  kUnsupportedForBackend,
  // losses
  kNoPositivePair,
  kNoNegativePair,
  kNoLabeledPairs,
  kNoTripletConstructible,
  // repr metrics
  kNoIntraPairs,
  kNoInterPairs,
  // trainer
  kDivergedLoss,
  kIncompatibleLossConfig,
  kContextLargerThanBatch,
  // gateway
  kEndpointUnreachable,
  kAuthFailure,
  // scoring
  kEmbeddingFailure,
  kEmptyEvaluation,
  // reports
  kTooFewPoints,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace contrabias
