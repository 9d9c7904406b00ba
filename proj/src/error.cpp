#include "efflob/error.hpp"

namespace efflob {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidState: return "invalid-state";
    case ErrorCode::IllicitEvent: return "illicit-event";
    case ErrorCode::MissingDraws: return "missing-draws";
    case ErrorCode::LengthMismatch: return "length-mismatch";
    case ErrorCode::Overflow: return "overflow";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::OutOfDomain: return "out-of-domain";
    case ErrorCode::ParameterFault: return "parameter-fault";
    case ErrorCode::InactiveEvent: return "inactive-event";
    case ErrorCode::Explosion: return "explosion";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

bool is_numerical(ErrorCode code) {
  return code == ErrorCode::ParameterFault || code == ErrorCode::Explosion ||
         code == ErrorCode::Overflow;
}

}  // namespace efflob
