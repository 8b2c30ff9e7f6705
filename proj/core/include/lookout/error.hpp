#pragma once

#include <stdexcept>
#include <string>

namespace lookout {

// Stable error categories. The CLI maps each one to a distinct exit code.
enum class ErrorCode {
  kInvalidArgument = 2,
  kMalformedConfig = 3,
  kMissingFile = 4,
  kShapeMismatch = 5,
  kProjectionOutOfRange = 6,
  kEmptyCandidateSet = 7,
  kAlignment = 8,
  kNonFiniteLoss = 9,
  kDecoderMutated = 10,
  kCheckpointVersion = 11,
  kMissingCheckpoint = 12,
  kIo = 13,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lookout
