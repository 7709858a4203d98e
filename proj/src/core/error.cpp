#include "cbq/error.hpp"

namespace cbq {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::CorruptIndex: return "CorruptIndex";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooManyGroups: return "TooManyGroups";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::LabelOverflow: return "LabelOverflow";
    case ErrorCode::NonzeroPadding: return "NonzeroPadding";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::IOFailure: return "IOFailure";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  }
  return "Unknown";
}

}  // namespace cbq
