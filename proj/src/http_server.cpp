#include "mooclet/http_server.hpp"

#include <httplib.h>

namespace mooclet {

struct HttpServer::Impl {
  explicit Impl(api::Service& s) : service(s) {}
  api::Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(api::Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    api::Request request;
    request.method = req.method;
    request.path = req.path;
    for (const auto& [k, v] : req.params) request.query[k] = v;
    for (const auto& [k, v] : req.headers) request.headers[k] = v;
    request.body = req.body;
    const auto response = impl_->service.route(request);
    res.status = response.status;
    res.set_content(response.body, response.content_type.c_str());
  };
  auto& s = impl_->server;
  s.Get(R"(/v1/.*)", handler);
  s.Post(R"(/v1/.*)", handler);
  s.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Authorization, Content-Type, Idempotency-Key"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

api::Response http_call(const std::string& host, int port, const api::Request& request) {
  httplib::Client client(host, port);
  client.set_read_timeout(60, 0);
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  httplib::Params params(request.query.begin(), request.query.end());
  httplib::Result result;
  if (request.method == "GET") {
    result = client.Get(request.path, params, headers);
  } else {
    std::string path = request.path;
    if (!params.empty()) path = httplib::append_query_params(path, params);
    result = client.Post(path, headers, request.body, "application/json");
  }
  if (!result)
    return api::error_response(ErrorCode::internal,
                               "cannot reach server at " + host + ":" + std::to_string(port) + ": " +
                                   httplib::to_string(result.error()),
                               503);
  auto type = result->get_header_value("Content-Type");
  return {result->status, type.empty() ? "application/json" : type, result->body};
}

}  // namespace mooclet
