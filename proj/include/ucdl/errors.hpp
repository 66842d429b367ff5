#pragma once

#include <stdexcept>
#include <string>

namespace ucdl {

enum class ErrorCode {
  ShapeMismatch,
  FilterTooLarge,
  NonPositiveGamma,
  NonPositiveBeta,
  InvalidConfig,
  NonFiniteValue,
  ZeroFilter,
  TraceMismatch,
  ZeroReference,
  RoiTooLarge,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for failures that come from the numerics rather than from bad input.
  bool is_numerical() const noexcept {
    return code_ == ErrorCode::NonFiniteValue || code_ == ErrorCode::ZeroFilter;
  }

 private:
  ErrorCode code_;
};

}  // namespace ucdl
