#include "mvg/error.hpp"

namespace mvg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownKeyframe: return "UnknownKeyframe";
    case ErrorCode::FeatureDimensionMismatch: return "FeatureDimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingFeature: return "MissingFeature";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace mvg
