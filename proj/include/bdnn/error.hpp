#pragma once

#include <stdexcept>
#include <string>

namespace bdnn {

enum class ErrorCode {
  ShapeMismatch,
  NonFiniteWeight,
  KernelLargerThanInput,
  DimensionMismatch,
  SingularSystem,
  RankTooLarge,
  EmptyInput,
  BadBitDepth,
  LengthMismatch,
  BadMagic,
  VersionMismatch,
  CorruptManifest,
  TruncatedBlob,
  BadConfig,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure in the library surfaces as this exception. The code is the
// stable, testable part; the message carries layer/shape context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bdnn
