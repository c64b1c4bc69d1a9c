#pragma once

#include <memory>
#include <string>

#include "mooclet/api.hpp"

namespace mooclet {

// HTTP/1.1 front end for api::Service. Adds permissive CORS headers so the
// dashboard can be served from any origin.
class HttpServer {
 public:
  explicit HttpServer(api::Service& service);
  ~HttpServer();

  // Binds to an ephemeral port when `port` is 0; returns the bound port or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Minimal client used by the command line tool and over-the-wire tests.
api::Response http_call(const std::string& host, int port, const api::Request& request);

}  // namespace mooclet
