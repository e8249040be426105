#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lowrank {

enum class ErrorCode {
  invalid_input,
  singular_evaluation,
  singular_loop,
  singular_projection,
  indeterminate_zero,
  numeric,
  non_finite_output,
  inconsistency,
  unsupported,
  config,
  io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::singular_evaluation: return "singular_evaluation";
    case ErrorCode::singular_loop: return "singular_loop";
    case ErrorCode::singular_projection: return "singular_projection";
    case ErrorCode::indeterminate_zero: return "indeterminate_zero";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::non_finite_output: return "non_finite_output";
    case ErrorCode::inconsistency: return "inconsistency";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

// Single exception type for the library; the code tells callers (and the
// CLI exit-status mapping) which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace lowrank
