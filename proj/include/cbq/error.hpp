#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cbq {

enum class ErrorCode {
  EmptyInput,
  NonFiniteInput,
  BadConfig,
  CorruptIndex,
  LengthMismatch,
  TooManyGroups,
  BadK,
  LabelOverflow,
  NonzeroPadding,
  BadMagic,
  UnsupportedVersion,
  ManifestMismatch,
  IOFailure,
  ShapeMismatch,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// All library failures surface as this exception; the C API maps `code()`
// onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cbq
