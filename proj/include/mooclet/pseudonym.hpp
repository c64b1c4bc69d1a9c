#pragma once

#include <string>
#include <string_view>

namespace mooclet {

// Maps raw learner identities to stable tokens with HMAC-SHA256 under a
// secret key. Only the forward direction exists; raw identities are never
// stored.
class Pseudonymizer {
 public:
  explicit Pseudonymizer(std::string key) : key_(std::move(key)) {}

  std::string token(std::string_view raw_identity) const;

  static std::string random_key();

 private:
  std::string key_;
};

}  // namespace mooclet
