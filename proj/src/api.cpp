#include "mooclet/api.hpp"

#include <algorithm>
#include <cctype>

#include "mooclet/rubric.hpp"

namespace mooclet::api {

using nlohmann::json;

namespace {

constexpr Role P = Role::platform;
constexpr Role I = Role::instructor;
constexpr Role R = Role::researcher;
constexpr Role A = Role::admin;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < path.size()) {
    auto end = path.find('/', start);
    if (end == std::string_view::npos) end = path.size();
    if (end > start) out.emplace_back(path.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

// Returns the captured parameters when `path` matches `pattern`.
std::optional<std::vector<std::string>> match(const std::string& pattern, std::string_view path) {
  const auto want = split_path(pattern);
  const auto got = split_path(path);
  if (want.size() != got.size()) return std::nullopt;
  std::vector<std::string> params;
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].front() == '{') params.push_back(got[i]);
    else if (want[i] != got[i]) return std::nullopt;
  }
  return params;
}

Response ok(const json& body, int status = 200) {
  return {status, "application/json", body.dump()};
}

json parse_body(const Request& request) {
  if (request.body.empty()) return json::object();
  json body = json::parse(request.body, nullptr, false);
  if (body.is_discarded()) fail(ErrorCode::validation, "request body is not valid JSON");
  if (!body.is_object()) fail(ErrorCode::validation, "request body must be a JSON object");
  return body;
}

template <class T>
T field(const json& body, const char* key) {
  if (!body.contains(key)) fail(ErrorCode::validation, std::string("missing field '") + key + "'");
  try {
    return body[key].get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::validation, std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
std::optional<T> optional_field(const json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return std::nullopt;
  return field<T>(body, key);
}

std::optional<Timestamp> time_field(const json& body, const char* key) {
  auto text = optional_field<std::string>(body, key);
  if (!text) return std::nullopt;
  auto ts = parse_timestamp(*text);
  if (!ts) fail(ErrorCode::validation, std::string("field '") + key + "' is not an ISO-8601 UTC time");
  return ts;
}

ValueFilter filter_from(const json& j) {
  ValueFilter f;
  f.learner = optional_field<std::string>(j, "learner");
  f.variable = optional_field<std::string>(j, "variable");
  f.from = time_field(j, "from");
  f.to = time_field(j, "to");
  return f;
}

ValueFilter filter_from_query(const Request& request) {
  json j = json::object();
  for (const auto& [k, v] : request.query) j[k] = v;
  return filter_from(j);
}

json variable_json(const Variable& v) { return json(v); }

json record_json(const ValueRecord& r) { return json(r); }

// Query-string context: JSON scalars where they parse, strings otherwise.
json context_from_query(const Request& request) {
  json ctx = json::object();
  for (const auto& [k, v] : request.query) {
    if (!k.starts_with("ctx.")) continue;
    json parsed = json::parse(v, nullptr, false);
    ctx[k.substr(4)] = (!parsed.is_discarded() && parsed.is_primitive()) ? parsed : json(v);
  }
  return ctx;
}

std::string fingerprint(const Request& r) {
  std::string out = r.method + " " + r.path + "?";
  for (const auto& [k, v] : r.query) out += k + "=" + v + "&";
  out += "\n" + r.body;
  return out;
}

}  // namespace

std::optional<std::string> Request::header(std::string_view name) const {
  const auto want = lower(name);
  for (const auto& [k, v] : headers)
    if (lower(k) == want) return v;
  return std::nullopt;
}

const std::vector<Endpoint>& endpoints() {
  static const std::vector<Endpoint> table = {
      {"whoami", "GET", "/v1/whoami", {P, I, R, A}, false},
      {"list_mooclets", "GET", "/v1/mooclets", {I, R, A}, false},
      {"create_mooclet", "POST", "/v1/mooclets", {I, A}, true},
      {"get_mooclet", "GET", "/v1/mooclet/{id}", {I, R, A}, false},
      {"add_version", "POST", "/v1/mooclet/{id}/versions", {I, A}, true},
      {"update_version", "POST", "/v1/mooclet/{id}/version/{version}", {I, A}, true},
      {"set_policy", "POST", "/v1/mooclet/{id}/policy", {I, A}, true},
      {"pin", "POST", "/v1/mooclet/{id}/pin", {I, A}, true},
      {"run", "GET", "/v1/mooclet/{id}/run", {P, A}, true},
      {"reward", "POST", "/v1/reward", {P, A}, true},
      {"push_value", "POST", "/v1/value", {P, A}, true},
      {"list_variables", "GET", "/v1/variables", {P, I, R, A}, false},
      {"define_variable", "POST", "/v1/variables", {I, A}, true},
      {"query", "POST", "/v1/query", {I, R, A}, false},
      {"dp", "POST", "/v1/dp", {R, A}, true},
      {"export", "GET", "/v1/export", {R, A}, false},
      {"import", "POST", "/v1/import", {A}, true},
      {"assignments", "GET", "/v1/assignments", {R, A}, false},
      {"stats", "GET", "/v1/stats/{id}", {I, R, A}, false},
      {"list_questions", "GET", "/v1/rubric/questions", {I, R, A}, false},
      {"create_question", "POST", "/v1/rubric/questions", {I, A}, true},
      {"question_options", "GET", "/v1/rubric/question/{id}/options", {I, R, A}, false},
      {"submit_response", "POST", "/v1/rubric/question/{id}/responses", {I, R, A}, true},
  };
  return table;
}

std::string_view wire_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::idempotency: return "conflict";
    case ErrorCode::state_corruption:
    case ErrorCode::internal: return "internal";
    default: return to_string(code);
  }
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::validation: return 400;
    case ErrorCode::permission: return 403;
    case ErrorCode::budget: return 429;
    case ErrorCode::no_versions: return 409;
    case ErrorCode::conflict: return 409;
    case ErrorCode::provenance: return 422;
    case ErrorCode::idempotency: return 409;
    case ErrorCode::state_corruption:
    case ErrorCode::internal: return 500;
  }
  return 500;
}

Response error_response(ErrorCode code, std::string_view message, int status) {
  json body = {{"error", {{"code", wire_code(code)}, {"message", message}}}};
  return {status ? status : http_status(code), "application/json", body.dump()};
}

json version_json(const Version& v) {
  json content = json::parse(v.content, nullptr, false);
  if (content.is_discarded()) content = v.content;
  return {{"id", v.id},
          {"name", v.name},
          {"content", content},
          {"weight", v.weight},
          {"archived", v.archived}};
}

json mooclet_json(const Mooclet& m) {
  json versions = json::array();
  for (const auto& v : m.versions) versions.push_back(version_json(v));
  return {{"id", m.id},
          {"name", m.name},
          {"sticky", m.sticky},
          {"policy", m.policy},
          {"pinned_version", m.pinned_version ? json(*m.pinned_version) : json(nullptr)},
          {"pin_updated_at", m.pin_updated_at ? json(format_timestamp(m.pin_updated_at)) : json(nullptr)},
          {"versions", versions}};
}

Service::Service(Engine& engine, std::vector<Principal> principals) : engine_(engine) {
  for (auto& p : principals) {
    if (p.token.empty()) fail(ErrorCode::validation, "principal '" + p.name + "' has an empty token");
    if (p.epsilon_total > 0.0) engine_.store().set_budget(p.name, p.epsilon_total);
    if (!by_token_.emplace(p.token, p).second)
      fail(ErrorCode::validation, "duplicate token for principal '" + p.name + "'");
  }
}

const Principal* Service::authenticate(const Request& request) const {
  auto auth = request.header("Authorization");
  if (!auth) return nullptr;
  constexpr std::string_view kBearer = "Bearer ";
  if (auth->size() <= kBearer.size() || lower(auth->substr(0, kBearer.size())) != "bearer ")
    return nullptr;
  auto it = by_token_.find(auth->substr(kBearer.size()));
  return it == by_token_.end() ? nullptr : &it->second;
}

Response Service::route(const Request& request) {
  const Endpoint* endpoint = nullptr;
  std::vector<std::string> params;
  bool path_known = false;
  for (const auto& e : endpoints()) {
    auto m = match(e.pattern, request.path);
    if (!m) continue;
    path_known = true;
    if (e.method == request.method) {
      endpoint = &e;
      params = std::move(*m);
      break;
    }
  }
  if (endpoint == nullptr) {
    if (path_known) return error_response(ErrorCode::validation, "method not allowed", 405);
    return error_response(ErrorCode::not_found, "no such endpoint: " + request.path);
  }
  const Principal* principal = authenticate(request);
  if (principal == nullptr)
    return error_response(ErrorCode::permission, "missing or unknown bearer token", 401);
  if (!endpoint->allowed.contains(principal->role))
    return error_response(ErrorCode::permission, "role '" + std::string(to_string(principal->role)) +
                                                     "' may not call " + endpoint->name);
  if (endpoint->mutating && request.header("Idempotency-Key"))
    return with_idempotency(*endpoint, params, request, *principal);
  return dispatch(*endpoint, params, request, *principal);
}

Response Service::with_idempotency(const Endpoint& endpoint, const std::vector<std::string>& params,
                                   const Request& request, const Principal& principal) {
  const auto key = principal.name + "\n" + *request.header("Idempotency-Key");
  const auto print = fingerprint(request);
  std::shared_ptr<std::mutex> key_lock;
  {
    std::lock_guard lock(idem_mu_);
    auto& slot = idem_locks_[key];
    if (!slot) slot = std::make_shared<std::mutex>();
    key_lock = slot;
  }
  std::lock_guard in_flight(*key_lock);
  {
    std::lock_guard lock(idem_mu_);
    if (auto it = idem_cache_.find(key); it != idem_cache_.end()) {
      if (it->second.fingerprint != print)
        return error_response(ErrorCode::conflict, "idempotency key reused with a different request");
      return it->second.response;
    }
  }
  Response response = dispatch(endpoint, params, request, principal);
  if (response.status < 500) {
    std::lock_guard lock(idem_mu_);
    idem_cache_[key] = {print, response};
  }
  return response;
}

Response Service::dispatch(const Endpoint& e, const std::vector<std::string>& params,
                           const Request& request, const Principal& principal) {
  try {
    const std::string& name = e.name;
    if (name == "whoami") {
      json out = {{"name", principal.name}, {"role", to_string(principal.role)}};
      if (auto b = engine_.store().budget(principal.name)) out["budget"] = *b;
      return ok(out);
    }
    if (name == "list_mooclets") {
      json list = json::array();
      for (const auto& m : engine_.list_mooclets()) list.push_back(mooclet_json(m));
      return ok({{"mooclets", list}});
    }
    if (name == "create_mooclet") {
      const json body = parse_body(request);
      PolicySpec policy;
      if (body.contains("policy")) policy = body["policy"].get<PolicySpec>();
      const bool sticky = optional_field<bool>(body, "sticky").value_or(true);
      return ok(mooclet_json(engine_.create_mooclet(field<std::string>(body, "name"), policy, sticky)), 201);
    }
    if (name == "get_mooclet") return ok(mooclet_json(engine_.get_mooclet(params[0])));
    if (name == "add_version") {
      const json body = parse_body(request);
      const json content = body.value("content", json(nullptr));
      const auto weight = optional_field<double>(body, "weight").value_or(1.0);
      auto v = engine_.add_version(params[0], optional_field<std::string>(body, "name").value_or(""),
                                   content.dump(), weight);
      return ok(version_json(v), 201);
    }
    if (name == "update_version") {
      const json body = parse_body(request);
      auto v = engine_.update_version(params[0], params[1], optional_field<double>(body, "weight"),
                                      optional_field<bool>(body, "archived"));
      return ok(version_json(v));
    }
    if (name == "set_policy") {
      const json body = parse_body(request);
      return ok(mooclet_json(engine_.set_policy(params[0], body.get<PolicySpec>())));
    }
    if (name == "pin") {
      const json body = parse_body(request);
      return ok(mooclet_json(engine_.pin_version(params[0], optional_field<std::string>(body, "version"))));
    }
    if (name == "run") {
      auto learner = request.query.find("learner");
      if (learner == request.query.end() || learner->second.empty())
        fail(ErrorCode::validation, "query parameter 'learner' is required");
      auto a = engine_.assign(params[0], learner->second, context_from_query(request));
      return ok({{"version", version_json(a.version)}, {"assignment", a.record}});
    }
    if (name == "reward") {
      const json body = parse_body(request);
      auto state = engine_.update_reward(field<std::string>(body, "mooclet"),
                                         field<std::string>(body, "version"),
                                         field<std::string>(body, "learner"), field<int>(body, "outcome"),
                                         optional_field<std::string>(body, "assignment"));
      return ok({{"state", state}});
    }
    if (name == "push_value") {
      const json body = parse_body(request);
      const auto variable = field<std::string>(body, "variable");
      const auto def = engine_.store().find_variable(variable);
      if (!def) fail(ErrorCode::not_found, "variable '" + variable + "' is not defined");
      if (!body.contains("value")) fail(ErrorCode::validation, "missing field 'value'");
      auto value = value_from_json(body["value"], def->value_type);
      if (!value)
        fail(ErrorCode::validation, "value does not match type " + std::string(to_string(def->value_type)));
      std::optional<Provenance> prov;
      if (body.contains("provenance") && !body["provenance"].is_null()) {
        const auto& p = body["provenance"];
        prov = Provenance{field<std::string>(p, "mooclet"), field<std::string>(p, "version"),
                          field<std::string>(p, "assignment")};
      }
      return ok(record_json(engine_.push_value(field<std::string>(body, "learner"), variable, *value, prov)),
                201);
    }
    if (name == "list_variables") {
      json list = json::array();
      for (const auto& v : engine_.store().list_variables()) list.push_back(variable_json(v));
      return ok({{"variables", list}});
    }
    if (name == "define_variable") {
      const json body = parse_body(request);
      field<std::string>(body, "name");
      return ok(variable_json(engine_.store().define_variable(body.get<Variable>())), 201);
    }
    if (name == "query") {
      const json body = parse_body(request);
      json list = json::array();
      for (const auto& r : engine_.store().query_values(filter_from(body), principal.role))
        list.push_back(record_json(r));
      return ok({{"records", list}});
    }
    if (name == "dp") {
      const json body = parse_body(request);
      auto agg = parse_aggregate(field<std::string>(body, "aggregate"));
      if (!agg) fail(ErrorCode::validation, "aggregate must be count, sum or mean");
      const json filter = body.value("filter", json::object());
      if (!filter.is_object()) fail(ErrorCode::validation, "filter must be an object");
      auto answer = engine_.store().dp_aggregate(*agg, field<std::string>(body, "variable"), filter_from(filter),
                                                 field<double>(body, "epsilon"), principal.name,
                                                 principal.role);
      return ok({{"value", answer.value},
                 {"epsilon_spent", answer.budget.epsilon_spent},
                 {"epsilon_remaining", answer.budget.remaining()}});
    }
    if (name == "export")
      return {200, "text/csv; charset=utf-8",
              engine_.store().export_csv(filter_from_query(request), principal.role)};
    if (name == "import") return ok({{"imported", engine_.store().import_csv(request.body)}});
    if (name == "assignments") return {200, "application/x-ndjson", engine_.assignment_log_text()};
    if (name == "stats") return ok(engine_.stats(params[0]));
    if (name == "list_questions") return ok({{"questions", engine_.rubric().questions()}});
    if (name == "create_question") {
      const json body = parse_body(request);
      auto options = optional_field<std::vector<std::string>>(body, "options").value_or(std::vector<std::string>{});
      return ok(engine_.rubric().add_question(field<std::string>(body, "prompt"), options), 201);
    }
    if (name == "question_options") return ok({{"options", engine_.rubric().options(params[0])}});
    if (name == "submit_response") {
      const json body = parse_body(request);
      RespondentRole role = principal.role == Role::researcher ? RespondentRole::researcher
                                                                : RespondentRole::instructor;
      if (auto r = optional_field<std::string>(body, "role"); r && principal.role == Role::admin) {
        auto parsed = parse_respondent_role(*r);
        if (!parsed) fail(ErrorCode::validation, "role must be instructor or researcher");
        role = *parsed;
      }
      auto response = engine_.rubric().submit_response(
          params[0], role, optional_field<std::string>(body, "free_text"),
          optional_field<std::vector<std::string>>(body, "selections").value_or(std::vector<std::string>{}));
      return ok({{"response", response}, {"options", engine_.rubric().options(params[0])}}, 201);
    }
    return error_response(ErrorCode::internal, "endpoint has no handler: " + name);
  } catch (const Error& err) {
    return error_response(err.code(), err.what());
  } catch (const json::exception& err) {
    return error_response(ErrorCode::validation, err.what());
  } catch (const std::exception& err) {
    return error_response(ErrorCode::internal, err.what());
  }
}

}  // namespace mooclet::api
