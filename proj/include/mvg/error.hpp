#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mvg {

enum class ErrorCode {
  UnknownKeyframe,
  FeatureDimensionMismatch,
  EmptyInput,
  MissingFeature,
  ValidationFailed,
  ShapeMismatch,
  DuplicateId,
  DimensionMismatch,
  ZeroVector,
  FormatError,
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code. Format
// errors additionally name the file and the byte offset where parsing stopped.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Error(ErrorCode code, const std::string& message, std::string file,
        std::optional<std::uint64_t> offset = std::nullopt)
      : std::runtime_error(message), code_(code), file_(std::move(file)), offset_(offset) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& file() const noexcept { return file_; }
  std::optional<std::uint64_t> offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::string file_;
  std::optional<std::uint64_t> offset_;
};

}  // namespace mvg
