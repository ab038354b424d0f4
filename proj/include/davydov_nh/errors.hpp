#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace davydov_nh {

enum class ErrorKind {
  NumericalInconsistency,
  Shape,
  NormUnderflow,
  SingularMetric,
  StepRejected,
  Truncation,
  Config,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NumericalInconsistency: return "NumericalInconsistency";
    case ErrorKind::Shape: return "ShapeError";
    case ErrorKind::NormUnderflow: return "NormUnderflow";
    case ErrorKind::SingularMetric: return "SingularMetric";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::Truncation: return "TruncationError";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class TaggedError : public Error {
 public:
  explicit TaggedError(const std::string& what) : Error(K, what) {}
};

using NumericalInconsistency = TaggedError<ErrorKind::NumericalInconsistency>;
using ShapeError = TaggedError<ErrorKind::Shape>;
using NormUnderflow = TaggedError<ErrorKind::NormUnderflow>;
using SingularMetric = TaggedError<ErrorKind::SingularMetric>;
using StepRejected = TaggedError<ErrorKind::StepRejected>;
using TruncationError = TaggedError<ErrorKind::Truncation>;
using ConfigError = TaggedError<ErrorKind::Config>;
using IoError = TaggedError<ErrorKind::Io>;

}  // namespace davydov_nh
