#pragma once

#include <stdexcept>
#include <string>

namespace taco {

enum class ErrorKind {
  kFormat,
  kEmptyInput,
  kIo,
  kBounds,
  kDimensionMismatch,
  kInsufficientData,
  kNumeric,
  kConvergence,
  kCapacity,
  kParameter,
  kState,
  kCorruption,
  kUnsupportedVersion,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace taco
