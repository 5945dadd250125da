#pragma once

#include <stdexcept>
#include <string>

namespace xlmimo {

enum class ErrorKind {
  InvalidDimension,
  UnsupportedDimension,
  InsufficientRows,
  InvalidParameter,
  NumericalFailure,
  Shape,
  Index,
  Division,
  TrainingFailure,
  Io,
  Format,
  Usage,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so callers (tests, the
// CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid dimension";
    case ErrorKind::UnsupportedDimension: return "unsupported dimension";
    case ErrorKind::InsufficientRows: return "insufficient rows";
    case ErrorKind::InvalidParameter: return "invalid parameter";
    case ErrorKind::NumericalFailure: return "numerical failure";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Index: return "index error";
    case ErrorKind::Division: return "division error";
    case ErrorKind::TrainingFailure: return "training failure";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Usage: return "usage error";
  }
  return "error";
}

}  // namespace xlmimo
