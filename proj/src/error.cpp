#include "contrabias/error.hpp"

namespace contrabias {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kMaskTokenMissing: return "MaskTokenMissing";
    case ErrorCode::kTooFewContexts: return "TooFewContexts";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kTokenizationFailure: return "TokenizationFailure";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnsupportedForBackend: return "UnsupportedForBackend";
    case ErrorCode::kNoPositivePair: return "NoPositivePair";
    case ErrorCode::kNoNegativePair: return "NoNegativePair";
    case ErrorCode::kNoLabeledPairs: return "NoLabeledPairs";
    case ErrorCode::kNoTripletConstructible: return "NoTripletConstructible";
    case ErrorCode::kNoIntraPairs: return "NoIntraPairs";
    case ErrorCode::kNoInterPairs: return "NoInterPairs";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kIncompatibleLossConfig: return "IncompatibleLossConfig";
    case ErrorCode::kContextLargerThanBatch: return "ContextLargerThanBatch";
    case ErrorCode::kEndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::kAuthFailure: return "AuthFailure";
    case ErrorCode::kEmbeddingFailure: return "EmbeddingFailure";
    case ErrorCode::kEmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

}  // namespace contrabias
