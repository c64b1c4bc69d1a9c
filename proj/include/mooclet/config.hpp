#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mooclet/principal.hpp"

namespace mooclet {

// Service configuration, read from a key-value file:
//
//   # comment
//   listen = 127.0.0.1:8080
//   data_dir = ./data
//   noise_test_mode = false
//   seed = 42
//   snapshot_every = 1000
//   principal = <name> <role> <token> [epsilon_total]
//
// `principal` may repeat. Unknown keys are rejected.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> data_dir;
  bool noise_test_mode = false;
  std::uint64_t seed = 0;
  std::uint64_t snapshot_every = 1000;
  std::vector<Principal> principals;
};

ServiceConfig parse_config(std::string_view text);
ServiceConfig load_config(const std::filesystem::path& path);

}  // namespace mooclet
