#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mooclet {

// Every failure the engine can report. The API layer maps each value onto a
// wire code and an HTTP status; see api.hpp.
enum class ErrorCode {
  not_found,
  validation,
  permission,
  budget,
  no_versions,
  conflict,
  provenance,
  idempotency,
  state_corruption,
  internal,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mooclet
