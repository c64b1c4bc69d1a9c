#pragma once

// Endpoint x role allow table, written out independently of the service's
// own endpoint list, plus a driver that issues one valid request per cell.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mooclet/api.hpp"

namespace role_matrix {

struct Row {
  std::string method;
  std::string path;
  std::string allowed;  // letters from P, I, R, A
};

inline const std::map<std::string, Row>& table() {
  static const std::map<std::string, Row> rows = {
      {"whoami", {"GET", "/v1/whoami", "PIRA"}},
      {"list_mooclets", {"GET", "/v1/mooclets", "IRA"}},
      {"create_mooclet", {"POST", "/v1/mooclets", "IA"}},
      {"get_mooclet", {"GET", "/v1/mooclet/{id}", "IRA"}},
      {"add_version", {"POST", "/v1/mooclet/{id}/versions", "IA"}},
      {"update_version", {"POST", "/v1/mooclet/{id}/version/{version}", "IA"}},
      {"set_policy", {"POST", "/v1/mooclet/{id}/policy", "IA"}},
      {"pin", {"POST", "/v1/mooclet/{id}/pin", "IA"}},
      {"run", {"GET", "/v1/mooclet/{id}/run", "PA"}},
      {"reward", {"POST", "/v1/reward", "PA"}},
      {"push_value", {"POST", "/v1/value", "PA"}},
      {"list_variables", {"GET", "/v1/variables", "PIRA"}},
      {"define_variable", {"POST", "/v1/variables", "IA"}},
      {"query", {"POST", "/v1/query", "IRA"}},
      {"dp", {"POST", "/v1/dp", "RA"}},
      {"export", {"GET", "/v1/export", "RA"}},
      {"import", {"POST", "/v1/import", "A"}},
      {"assignments", {"GET", "/v1/assignments", "RA"}},
      {"stats", {"GET", "/v1/stats/{id}", "IRA"}},
      {"list_questions", {"GET", "/v1/rubric/questions", "IRA"}},
      {"create_question", {"POST", "/v1/rubric/questions", "IA"}},
      {"question_options", {"GET", "/v1/rubric/question/{id}/options", "IRA"}},
      {"submit_response", {"POST", "/v1/rubric/question/{id}/responses", "IRA"}},
  };
  return rows;
}

inline const std::vector<mooclet::Principal>& principals() {
  using mooclet::Role;
  static const std::vector<mooclet::Principal> p = {
      {"lms", "tok-platform", Role::platform, 0},
      {"ines", "tok-instructor", Role::instructor, 0},
      {"rhea", "tok-researcher", Role::researcher, 100},
      {"root", "tok-admin", Role::admin, 100},
  };
  return p;
}

inline char letter(mooclet::Role role) {
  switch (role) {
    case mooclet::Role::platform: return 'P';
    case mooclet::Role::instructor: return 'I';
    case mooclet::Role::researcher: return 'R';
    case mooclet::Role::admin: return 'A';
  }
  return '?';
}

struct Cell {
  std::string endpoint;
  mooclet::Role role;
  bool expect_allowed = false;
  int status = 0;
  std::string body;

  // Allowed cells must succeed; denied cells must be 403 permission.
  bool ok() const {
    if (expect_allowed) return status < 300;
    if (status != 403) return false;
    auto j = nlohmann::json::parse(body, nullptr, false);
    return j.is_object() && j.contains("error") && j["error"].value("code", "") == "permission";
  }
};

// Seeds a MOOClet with two versions, an outcome variable and a question, then
// issues one request per (endpoint, role).
inline std::vector<Cell> run(mooclet::Engine& engine, mooclet::api::Service& service) {
  using namespace mooclet;
  using nlohmann::json;
  engine.store().define_variable({"outcome", VariableKind::outcome, ValueType::number, "", Bounds{0, 1}});
  const auto m = engine.create_mooclet("matrix", PolicySpec::thompson());
  const auto v = engine.add_version(m.id, "A", "{}");
  engine.add_version(m.id, "B", "{}");
  const auto q = engine.rubric().add_question("Which components?", {"homework exercises", "text documents"});

  std::vector<Cell> cells;
  for (const auto& [name, row] : table()) {
    for (Role role : {Role::platform, Role::instructor, Role::researcher, Role::admin}) {
      const std::string suffix = name + "-" + std::string(to_string(role));
      std::string path = row.path;
      auto replace = [&](const std::string& from, const std::string& to) {
        if (auto at = path.find(from); at != std::string::npos) path.replace(at, from.size(), to);
      };
      replace("{version}", v.id);
      replace("{id}", name == "question_options" || name == "submit_response" ? q.id : m.id);
      json body = nullptr;
      api::Request r;
      if (name == "create_mooclet") body = {{"name", suffix}};
      if (name == "add_version") body = {{"name", suffix}, {"content", {{"k", 1}}}};
      if (name == "update_version") body = {{"weight", 2.0}};
      if (name == "set_policy") body = {{"kind", "thompson_bernoulli"}};
      if (name == "pin") body = {{"version", nullptr}};
      if (name == "run") r.query = {{"learner", suffix}};
      if (name == "push_value") body = {{"learner", suffix}, {"variable", "outcome"}, {"value", 1}};
      if (name == "define_variable") body = {{"name", suffix}, {"kind", "covariate"}, {"value_type", "text"}};
      if (name == "query") body = json::object();
      if (name == "dp") body = {{"aggregate", "count"}, {"variable", "outcome"}, {"epsilon", 0.01}};
      if (name == "create_question") body = {{"prompt", suffix}};
      if (name == "submit_response") body = {{"selections", {"text documents"}}};
      if (name == "reward") {
        const auto a = engine.assign(m.id, suffix);
        body = {{"mooclet", m.id}, {"version", a.version.id}, {"learner", suffix}, {"outcome", 1}};
      }
      r.method = row.method;
      r.path = path;
      for (const auto& p : principals())
        if (p.role == role) r.headers["Authorization"] = "Bearer " + p.token;
      r.body = name == "import" ? std::string(kExportHeader) + "\r\n" : (body.is_null() ? "" : body.dump());
      const auto resp = service.route(r);
      cells.push_back({name, role, row.allowed.find(letter(role)) != std::string::npos, resp.status, resp.body});
    }
  }
  return cells;
}

}  // namespace role_matrix
