#include "lookout/error.hpp"

namespace lookout {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kMalformedConfig: return "malformed_config";
    case ErrorCode::kMissingFile: return "missing_file";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kProjectionOutOfRange: return "projection_out_of_range";
    case ErrorCode::kEmptyCandidateSet: return "empty_candidate_set";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kNonFiniteLoss: return "non_finite_loss";
    case ErrorCode::kDecoderMutated: return "decoder_mutated";
    case ErrorCode::kCheckpointVersion: return "checkpoint_version";
    case ErrorCode::kMissingCheckpoint: return "missing_checkpoint";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace lookout
