#pragma once

#include <stdexcept>
#include <string>

namespace efflob {

enum class ErrorCode {
  InvalidState,
  IllicitEvent,
  MissingDraws,
  LengthMismatch,
  Overflow,
  DimensionMismatch,
  OutOfDomain,
  ParameterFault,
  InactiveEvent,
  Explosion,
  Validation,
  Schema,
  Io,
};

const char* error_code_name(ErrorCode code);

// Numerical faults (exit code 3) vs. input/validation problems (exit code 2).
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace efflob
