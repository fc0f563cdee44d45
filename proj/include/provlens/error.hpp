#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace provlens {

// Machine-readable error codes. The service maps these onto HTTP statuses.
enum class ErrorCode {
  bad_input,       // malformed dataset / log / request payload
  unknown_entity,  // attribute or record not in the dataset
  unknown_kind,    // unsupported action kind
  stale_seq,       // event seq not strictly increasing
  invalid_event,   // event violates InteractionEvent invariants
  invalid_mode,    // operation not permitted in the session mode
  hash_mismatch,   // imported log was recorded against another dataset
  bad_spec,        // VisSpec / TransformSpec failed validation
  not_found,       // session or resource missing
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::bad_input: return "bad_input";
    case ErrorCode::unknown_entity: return "unknown_entity";
    case ErrorCode::unknown_kind: return "unknown_kind";
    case ErrorCode::stale_seq: return "stale_seq";
    case ErrorCode::invalid_event: return "invalid_event";
    case ErrorCode::invalid_mode: return "invalid_mode";
    case ErrorCode::hash_mismatch: return "hash_mismatch";
    case ErrorCode::bad_spec: return "bad_spec";
    case ErrorCode::not_found: return "not_found";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace provlens
