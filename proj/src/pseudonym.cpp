#include "mooclet/pseudonym.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include "mooclet/errors.hpp"

namespace mooclet {

namespace {

std::string hex(const unsigned char* data, std::size_t len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out += kDigits[data[i] >> 4];
    out += kDigits[data[i] & 0xf];
  }
  return out;
}

}  // namespace

std::string Pseudonymizer::token(std::string_view raw_identity) const {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key_.data(), static_cast<int>(key_.size()),
           reinterpret_cast<const unsigned char*>(raw_identity.data()), raw_identity.size(),
           digest, &len) == nullptr)
    fail(ErrorCode::internal, "HMAC failed");
  // 80 bits is ample for course-scale populations.
  return "p_" + hex(digest, 10);
}

std::string Pseudonymizer::random_key() {
  unsigned char buf[32];
  if (RAND_bytes(buf, sizeof buf) != 1) fail(ErrorCode::internal, "RAND_bytes failed");
  return hex(buf, sizeof buf);
}

}  // namespace mooclet
