#include "mooclet/errors.hpp"

#include "mooclet/principal.hpp"

namespace mooclet {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::validation: return "validation";
    case ErrorCode::permission: return "permission";
    case ErrorCode::budget: return "budget";
    case ErrorCode::no_versions: return "no_versions";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::provenance: return "provenance";
    case ErrorCode::idempotency: return "idempotency";
    case ErrorCode::state_corruption: return "state_corruption";
    case ErrorCode::internal: return "internal";
  }
  return "internal";
}

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::platform: return "platform";
    case Role::instructor: return "instructor";
    case Role::researcher: return "researcher";
    case Role::admin: return "admin";
  }
  return "platform";
}

std::optional<Role> parse_role(std::string_view text) noexcept {
  if (text == "platform") return Role::platform;
  if (text == "instructor") return Role::instructor;
  if (text == "researcher") return Role::researcher;
  if (text == "admin") return Role::admin;
  return std::nullopt;
}

}  // namespace mooclet
