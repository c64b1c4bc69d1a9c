#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mooclet/engine.hpp"
#include "mooclet/errors.hpp"
#include "mooclet/principal.hpp"

namespace mooclet::api {

// Transport-neutral request. Header names are matched case-insensitively.
struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;
  std::string body;

  std::optional<std::string> header(std::string_view name) const;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  bool operator==(const Response&) const = default;
};

struct Endpoint {
  std::string name;
  std::string method;
  std::string pattern;  // segments in braces are parameters
  std::set<Role> allowed;
  bool mutating = false;
};

// Every endpoint with its role set; the single source of the role matrix.
const std::vector<Endpoint>& endpoints();

// Wire code for an engine error and its HTTP status.
std::string_view wire_code(ErrorCode code) noexcept;
int http_status(ErrorCode code) noexcept;
Response error_response(ErrorCode code, std::string_view message, int status = 0);

// Routes authenticated requests onto an Engine. Thread-safe; all mutable
// state lives in the engine apart from the idempotency-key cache.
class Service {
 public:
  Service(Engine& engine, std::vector<Principal> principals);

  Response route(const Request& request);

  const Principal* authenticate(const Request& request) const;
  Engine& engine() noexcept { return engine_; }

 private:
  Response dispatch(const Endpoint& endpoint, const std::vector<std::string>& params,
                    const Request& request, const Principal& principal);
  Response with_idempotency(const Endpoint& endpoint, const std::vector<std::string>& params,
                            const Request& request, const Principal& principal);

  Engine& engine_;
  std::map<std::string, Principal> by_token_;

  struct CachedResponse {
    std::string fingerprint;
    Response response;
  };
  std::mutex idem_mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> idem_locks_;
  std::map<std::string, CachedResponse> idem_cache_;
};

// Mooclet as served over the wire: content is returned as the JSON document
// it was stored from.
nlohmann::json mooclet_json(const Mooclet& mooclet);
nlohmann::json version_json(const Version& version);

}  // namespace mooclet::api
