#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace mooclet {

enum class Role { platform, instructor, researcher, admin };

std::string_view to_string(Role role) noexcept;
std::optional<Role> parse_role(std::string_view text) noexcept;

struct Principal {
  std::string name;   // appears in logs and budget accounting
  std::string token;  // secret bearer token
  Role role = Role::platform;
  // Differential-privacy budget; only meaningful for principals that may
  // issue noisy aggregate queries.
  double epsilon_total = 0.0;
};

}  // namespace mooclet
