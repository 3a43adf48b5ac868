#include "common/error.hpp"

namespace polyscore {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::ShapeMismatch: return "shape mismatch";
    case ErrorCode::NonFinite: return "non-finite value";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Overflow: return "overflow";
    case ErrorCode::Geometry: return "geometry mismatch";
    case ErrorCode::ParameterMismatch: return "parameter mismatch";
    case ErrorCode::BudgetExhausted: return "noise budget exhausted";
    case ErrorCode::NoParameterSet: return "no parameter set fits";
    case ErrorCode::Protocol: return "protocol error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Config: return "configuration error";
    case ErrorCode::Divergence: return "training diverged";
    case ErrorCode::KeyConfinement: return "key confinement violation";
  }
  return "unknown";
}

void raise(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(to_string(code)) + ": " + message);
}

}  // namespace polyscore
