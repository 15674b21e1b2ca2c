#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace kstab {

enum class ErrorCode {
  EmptyInput,
  DegeneratePolytope,
  OriginNotInterior,
  NotReflexive,
  RedundantRay,
  FunctionUndefined,
  InvalidMultiplicity,
  OptimizationFailed,
  DimensionUnsupported,
  TailBoundFailure,
  CrossCheckFailed,
  MonotonicityViolation,
  MalformedHeader,
  MatrixShapeMismatch,
  NonIntegerEntry,
  SchemaViolation,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegeneratePolytope: return "DegeneratePolytope";
    case ErrorCode::OriginNotInterior: return "OriginNotInterior";
    case ErrorCode::NotReflexive: return "NotReflexive";
    case ErrorCode::RedundantRay: return "RedundantRay";
    case ErrorCode::FunctionUndefined: return "FunctionUndefined";
    case ErrorCode::InvalidMultiplicity: return "InvalidMultiplicity";
    case ErrorCode::OptimizationFailed: return "OptimizationFailed";
    case ErrorCode::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorCode::TailBoundFailure: return "TailBoundFailure";
    case ErrorCode::CrossCheckFailed: return "CrossCheckFailed";
    case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::MatrixShapeMismatch: return "MatrixShapeMismatch";
    case ErrorCode::NonIntegerEntry: return "NonIntegerEntry";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library. `offset` is a line number for
/// parse errors and unset otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<std::size_t> offset = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), offset_(offset) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> offset_;
};

}  // namespace kstab
