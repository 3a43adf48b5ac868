#pragma once

#include <stdexcept>
#include <string>

namespace polyscore {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  NonFinite,
  Unsupported,
  Overflow,
  Geometry,
  ParameterMismatch,
  BudgetExhausted,
  NoParameterSet,
  Protocol,
  Io,
  Config,
  Divergence,
  KeyConfinement,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) raise(code, message);
}

}  // namespace polyscore
