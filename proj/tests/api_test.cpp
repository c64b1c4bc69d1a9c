#include <gtest/gtest.h>

#include <map>
#include <set>
#include <thread>

#include "mooclet/api.hpp"
#include "mooclet/http_server.hpp"
#include "role_matrix.hpp"
#include "test_support.hpp"

using namespace mooclet;
using api::Request;
using api::Response;
using nlohmann::json;

namespace {

const std::vector<Principal>& kPrincipals = role_matrix::principals();

std::string token_for(Role role) {
  for (const auto& p : kPrincipals)
    if (p.role == role) return p.token;
  return "";
}

EngineOptions options() {
  EngineOptions o;
  o.seed = 4242;
  o.noise_test_mode = true;
  o.clock = logical_clock(1'426'291'200'000'000);
  return o;
}

class ApiTest : public ::testing::Test {
 protected:
  Engine engine{options()};
  api::Service service{engine, kPrincipals};

  Response call(Role role, std::string method, std::string path, json body = nullptr,
                std::map<std::string, std::string> query = {}, std::map<std::string, std::string> headers = {}) {
    Request r;
    r.method = std::move(method);
    r.path = std::move(path);
    r.query = std::move(query);
    r.headers = std::move(headers);
    r.headers["Authorization"] = "Bearer " + token_for(role);
    if (!body.is_null()) r.body = body.dump();
    return service.route(r);
  }

  static json body_of(const Response& r) { return json::parse(r.body); }
  static std::string error_code(const Response& r) { return body_of(r).at("error").at("code"); }

  // A MOOClet with two versions, a defined outcome variable and a question.
  void seed_world() {
    ASSERT_EQ(call(Role::admin, "POST", "/v1/variables",
                   {{"name", "outcome"}, {"kind", "outcome"}, {"value_type", "number"}, {"bounds", {0, 1}}})
                  .status,
              201);
    auto m = call(Role::instructor, "POST", "/v1/mooclets",
                  {{"name", "email-reminder"}, {"policy", {{"kind", "thompson_bernoulli"}}}});
    ASSERT_EQ(m.status, 201) << m.body;
    mooclet = body_of(m)["id"];
    for (const auto* name : {"A", "B"}) {
      auto v = call(Role::instructor, "POST", "/v1/mooclet/" + mooclet + "/versions",
                    {{"name", name}, {"content", {{"subject", std::string("Subject ") + name}}}});
      ASSERT_EQ(v.status, 201) << v.body;
      versions.push_back(body_of(v)["id"]);
    }
    auto q = call(Role::instructor, "POST", "/v1/rubric/questions",
                  {{"prompt", "Which components?"}, {"options", {"homework exercises", "text documents"}}});
    ASSERT_EQ(q.status, 201) << q.body;
    question = body_of(q)["id"];
  }

  std::string mooclet;
  std::vector<std::string> versions;
  std::string question;
};

}  // namespace

TEST_F(ApiTest, RunReturnsVersionAndContent) {
  seed_world();
  auto r = call(Role::platform, "GET", "/v1/mooclet/" + mooclet + "/run", nullptr, {{"learner", "alice"}});
  ASSERT_EQ(r.status, 200) << r.body;
  const auto b = body_of(r);
  EXPECT_TRUE(b["version"]["content"].contains("subject"));
  EXPECT_EQ(b["assignment"]["mooclet"], mooclet);
  EXPECT_NE(b["assignment"]["learner"], "alice");
  EXPECT_EQ(r.body.find("alice"), std::string::npos);
}

TEST_F(ApiTest, ResearcherCannotPushValues) {
  seed_world();
  auto r = call(Role::researcher, "POST", "/v1/value", {{"learner", "l"}, {"variable", "outcome"}, {"value", 1}});
  EXPECT_EQ(r.status, 403);
  EXPECT_EQ(error_code(r), "permission");
}

TEST_F(ApiTest, AuthenticationFailures) {
  Request r{"GET", "/v1/whoami", {}, {}, ""};
  EXPECT_EQ(service.route(r).status, 401);
  r.headers["authorization"] = "Bearer nope";
  EXPECT_EQ(service.route(r).status, 401);
  r.headers["authorization"] = "bearer tok-researcher";
  auto ok = service.route(r);
  ASSERT_EQ(ok.status, 200);
  EXPECT_EQ(body_of(ok)["role"], "researcher");
  EXPECT_DOUBLE_EQ(body_of(ok)["budget"]["epsilon_total"].get<double>(), 100);
}

TEST_F(ApiTest, UnknownPathAndWrongMethod) {
  auto a = call(Role::admin, "GET", "/v1/nothing");
  EXPECT_EQ(a.status, 404);
  EXPECT_EQ(error_code(a), "not_found");
  auto b = call(Role::admin, "POST", "/v1/whoami");
  EXPECT_EQ(b.status, 405);
  EXPECT_EQ(error_code(b), "validation");
}

TEST_F(ApiTest, MalformedBodiesAreValidationErrors) {
  seed_world();
  Request r{"POST", "/v1/mooclets", {}, {{"Authorization", "Bearer tok-admin"}}, "{not json"};
  auto a = service.route(r);
  EXPECT_EQ(a.status, 400);
  EXPECT_EQ(error_code(a), "validation");
  r.body = "[1,2]";
  EXPECT_EQ(service.route(r).status, 400);
  EXPECT_EQ(call(Role::admin, "POST", "/v1/mooclets", {{"name", 5}}).status, 400);
  EXPECT_EQ(call(Role::admin, "POST", "/v1/mooclets", {{"name", "x"}, {"policy", {{"kind", "bogus"}}}}).status, 400);
  EXPECT_EQ(call(Role::platform, "GET", "/v1/mooclet/" + mooclet + "/run").status, 400);
  EXPECT_EQ(call(Role::admin, "POST", "/v1/dp", {{"aggregate", "median"}, {"variable", "outcome"}, {"epsilon", 1}})
                .status,
            400);
}

TEST_F(ApiTest, ErrorCodesAndStatuses) {
  seed_world();
  auto nf = call(Role::admin, "GET", "/v1/mooclet/m999");
  EXPECT_EQ(nf.status, 404);
  EXPECT_EQ(error_code(nf), "not_found");

  auto empty = body_of(call(Role::admin, "POST", "/v1/mooclets", {{"name", "empty"}}))["id"].get<std::string>();
  auto nv = call(Role::platform, "GET", "/v1/mooclet/" + empty + "/run", nullptr, {{"learner", "l"}});
  EXPECT_EQ(nv.status, 409);
  EXPECT_EQ(error_code(nv), "no_versions");

  auto dup = call(Role::admin, "POST", "/v1/variables", {{"name", "outcome"}, {"kind", "outcome"}, {"value_type", "number"}});
  EXPECT_EQ(dup.status, 409);
  EXPECT_EQ(error_code(dup), "conflict");

  auto prov = call(Role::platform, "POST", "/v1/reward",
                   {{"mooclet", mooclet}, {"version", versions[0]}, {"learner", "never"}, {"outcome", 1}});
  EXPECT_EQ(prov.status, 422);
  EXPECT_EQ(error_code(prov), "provenance");

  auto run = body_of(call(Role::platform, "GET", "/v1/mooclet/" + mooclet + "/run", nullptr, {{"learner", "l"}}));
  json reward = {{"mooclet", mooclet}, {"version", run["version"]["id"]}, {"learner", "l"}, {"outcome", 1},
                 {"assignment", run["assignment"]["id"]}};
  EXPECT_EQ(call(Role::platform, "POST", "/v1/reward", reward).status, 200);
  auto again = call(Role::platform, "POST", "/v1/reward", reward);
  EXPECT_EQ(again.status, 409);
  EXPECT_EQ(error_code(again), "conflict");

  service.engine().store().set_budget("rhea", 1.0);
  json dp = {{"aggregate", "count"}, {"variable", "outcome"}, {"epsilon", 0.7}};
  EXPECT_EQ(call(Role::researcher, "POST", "/v1/dp", dp).status, 200);
  auto over = call(Role::researcher, "POST", "/v1/dp", dp);
  EXPECT_EQ(over.status, 429);
  EXPECT_EQ(error_code(over), "budget");
  EXPECT_DOUBLE_EQ(engine.store().budget("rhea")->epsilon_spent, 0.7);
}

TEST(ApiErrorMapping, TotalOverEveryCode) {
  const std::set<std::string> documented = {"not_found", "validation", "permission", "budget",
                                            "no_versions", "conflict", "provenance", "internal"};
  const std::map<ErrorCode, int> status = {
      {ErrorCode::not_found, 404},  {ErrorCode::validation, 400},   {ErrorCode::permission, 403},
      {ErrorCode::budget, 429},     {ErrorCode::no_versions, 409},  {ErrorCode::conflict, 409},
      {ErrorCode::provenance, 422}, {ErrorCode::idempotency, 409},  {ErrorCode::state_corruption, 500},
      {ErrorCode::internal, 500}};
  for (const auto& [code, want] : status) {
    EXPECT_TRUE(documented.contains(std::string(api::wire_code(code)))) << to_string(code);
    EXPECT_EQ(api::http_status(code), want) << to_string(code);
    const auto body = json::parse(api::error_response(code, "m").body);
    EXPECT_EQ(body["error"]["message"], "m");
  }
}

// ---------------------------------------------------------------------------
// Role matrix

TEST(RoleMatrix, TableCoversEveryServedEndpoint) {
  std::set<std::string> served;
  for (const auto& e : api::endpoints()) {
    served.insert(e.name);
    ASSERT_TRUE(role_matrix::table().contains(e.name)) << e.name;
    EXPECT_EQ(role_matrix::table().at(e.name).method, e.method) << e.name;
    EXPECT_EQ(role_matrix::table().at(e.name).path, e.pattern) << e.name;
  }
  EXPECT_EQ(served.size(), role_matrix::table().size());
}

TEST(RoleMatrix, EveryEndpointAndRole) {
  Engine engine(options());
  api::Service service(engine, role_matrix::principals());
  const auto cells = role_matrix::run(engine, service);
  EXPECT_EQ(cells.size(), 23u * 4u);
  for (const auto& c : cells)
    EXPECT_TRUE(c.ok()) << c.endpoint << " as " << to_string(c.role) << " -> " << c.status << " " << c.body;
}

// ---------------------------------------------------------------------------
// Idempotency

TEST_F(ApiTest, IdempotentRunCreatesOneAssignment) {
  seed_world();
  const std::map<std::string, std::string> key = {{"Idempotency-Key", "k-1"}};
  auto a = call(Role::platform, "GET", "/v1/mooclet/" + mooclet + "/run", nullptr, {{"learner", "l"}}, key);
  auto b = call(Role::platform, "GET", "/v1/mooclet/" + mooclet + "/run", nullptr, {{"learner", "l"}}, key);
  EXPECT_EQ(a, b);
  EXPECT_EQ(engine.assignment_log().size(), 1u);
  auto c = call(Role::platform, "GET", "/v1/mooclet/" + mooclet + "/run", nullptr, {{"learner", "other"}}, key);
  EXPECT_EQ(c.status, 409);
  EXPECT_EQ(error_code(c), "conflict");
  // Keys are scoped per principal.
  auto d = call(Role::admin, "GET", "/v1/mooclet/" + mooclet + "/run", nullptr, {{"learner", "other"}}, key);
  EXPECT_EQ(d.status, 200);
  EXPECT_EQ(engine.assignment_log().size(), 2u);
}

TEST_F(ApiTest, IdempotentWritesHaveSingleSideEffect) {
  seed_world();
  const auto before = engine.store().record_count();
  json push = {{"learner", "l"}, {"variable", "outcome"}, {"value", 0.5}};
  for (int i = 0; i < 3; ++i)
    EXPECT_EQ(call(Role::platform, "POST", "/v1/value", push, {}, {{"Idempotency-Key", "push"}}).status, 201);
  EXPECT_EQ(engine.store().record_count(), before + 1);

  json resp = {{"selections", {"text documents"}}};
  for (int i = 0; i < 3; ++i)
    call(Role::instructor, "POST", "/v1/rubric/question/" + question + "/responses", resp, {},
         {{"idempotency-key", "resp"}});
  EXPECT_EQ(engine.rubric().options(question).front().count, 1u);

  json dp = {{"aggregate", "count"}, {"variable", "outcome"}, {"epsilon", 0.5}};
  auto first = call(Role::researcher, "POST", "/v1/dp", dp, {}, {{"Idempotency-Key", "dp"}});
  auto second = call(Role::researcher, "POST", "/v1/dp", dp, {}, {{"Idempotency-Key", "dp"}});
  EXPECT_EQ(first, second);
  EXPECT_DOUBLE_EQ(engine.store().budget("rhea")->epsilon_spent, 0.5);
}

TEST_F(ApiTest, ConcurrentReplaysOfOneKeyApplyOnce) {
  seed_world();
  std::vector<std::thread> threads;
  std::vector<Response> responses(8);
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      responses[t] = call(Role::platform, "GET", "/v1/mooclet/" + mooclet + "/run", nullptr, {{"learner", "l"}},
                          {{"Idempotency-Key", "same"}});
    });
  for (auto& th : threads) th.join();
  for (const auto& r : responses) EXPECT_EQ(r, responses[0]);
  EXPECT_EQ(engine.assignment_log().size(), 1u);
}

TEST_F(ApiTest, ErrorsAreCachedUnderTheirKey) {
  seed_world();
  json bad = {{"learner", "l"}, {"variable", "nope"}, {"value", 1}};
  auto a = call(Role::platform, "POST", "/v1/value", bad, {}, {{"Idempotency-Key", "e"}});
  EXPECT_EQ(a.status, 404);
  engine.store().define_variable({"nope", VariableKind::outcome, ValueType::number, "", std::nullopt});
  EXPECT_EQ(call(Role::platform, "POST", "/v1/value", bad, {}, {{"Idempotency-Key", "e"}}), a);
}

// ---------------------------------------------------------------------------
// End-to-end flows

TEST_F(ApiTest, PinThenEveryRunServesPinned) {
  seed_world();
  auto pinned = call(Role::instructor, "POST", "/v1/mooclet/" + mooclet + "/pin", {{"version", versions[1]}});
  ASSERT_EQ(pinned.status, 200);
  EXPECT_FALSE(body_of(pinned)["pin_updated_at"].is_null());
  for (int i = 0; i < 50; ++i) {
    auto r = call(Role::platform, "GET", "/v1/mooclet/" + mooclet + "/run", nullptr,
                  {{"learner", "l" + std::to_string(i)}, {"ctx.segment", "x"}});
    ASSERT_EQ(body_of(r)["version"]["id"], versions[1]);
  }
  auto stats = body_of(call(Role::instructor, "GET", "/v1/stats/" + mooclet));
  EXPECT_EQ(stats["total_assignments"], 50);
  EXPECT_EQ(stats["pinned_version"], versions[1]);
}

TEST_F(ApiTest, ContextFromQueryString) {
  call(Role::admin, "POST", "/v1/variables", {{"name", "segment"}, {"kind", "context"}, {"value_type", "text"}});
  auto m = body_of(call(Role::admin, "POST", "/v1/mooclets",
                        {{"name", "c"},
                         {"sticky", false},
                         {"policy", {{"kind", "contextual_thompson"}, {"parameters", {{"context_variable", "segment"}}}}}}));
  ASSERT_TRUE(m.contains("id")) << m.dump();
  const std::string id = m["id"];
  call(Role::admin, "POST", "/v1/mooclet/" + id + "/versions", {{"name", "A"}, {"content", {}}});
  auto r = body_of(call(Role::platform, "GET", "/v1/mooclet/" + id + "/run", nullptr,
                        {{"learner", "l"}, {"ctx.segment", "evening"}}));
  EXPECT_EQ(r["assignment"]["context"]["segment"], "evening");
}

TEST_F(ApiTest, ValueQueryExportImport) {
  seed_world();
  auto run = body_of(call(Role::platform, "GET", "/v1/mooclet/" + mooclet + "/run", nullptr, {{"learner", "bo"}}));
  json push = {{"learner", "bo"},
               {"variable", "outcome"},
               {"value", 1},
               {"provenance",
                {{"mooclet", mooclet}, {"version", run["version"]["id"]}, {"assignment", run["assignment"]["id"]}}}};
  ASSERT_EQ(call(Role::platform, "POST", "/v1/value", push).status, 201);
  auto bad = push;
  bad["provenance"]["assignment"] = "a999";
  EXPECT_EQ(call(Role::platform, "POST", "/v1/value", bad).status, 422);
  bad = push;
  bad["value"] = "one";
  EXPECT_EQ(call(Role::platform, "POST", "/v1/value", bad).status, 400);

  auto q = body_of(call(Role::instructor, "POST", "/v1/query", {{"variable", "outcome"}}));
  ASSERT_EQ(q["records"].size(), 1u);
  EXPECT_EQ(q["records"][0]["provenance"]["assignment"], run["assignment"]["id"]);

  auto csv = call(Role::researcher, "GET", "/v1/export");
  ASSERT_EQ(csv.status, 200);
  EXPECT_TRUE(csv.content_type.starts_with("text/csv"));

  Engine other(options());
  api::Service svc2(other, kPrincipals);
  other.store().define_variable({"outcome", VariableKind::outcome, ValueType::number, "", Bounds{0, 1}});
  Request imp{"POST", "/v1/import", {}, {{"Authorization", "Bearer tok-admin"}}, csv.body};
  auto imported = svc2.route(imp);
  ASSERT_EQ(imported.status, 200) << imported.body;
  EXPECT_EQ(body_of(imported)["imported"], 2);  // outcome + version_of
  Request exp{"GET", "/v1/export", {}, {{"Authorization", "Bearer tok-admin"}}, ""};
  EXPECT_EQ(svc2.route(exp).body, csv.body);

  auto log = call(Role::researcher, "GET", "/v1/assignments");
  EXPECT_EQ(log.content_type, "application/x-ndjson");
  EXPECT_EQ(log.body, engine.assignment_log_text());
}

TEST_F(ApiTest, RubricFlow) {
  seed_world();
  auto r = call(Role::researcher, "POST", "/v1/rubric/question/" + question + "/responses",
                {{"free_text", "Email reminders"}});
  ASSERT_EQ(r.status, 201) << r.body;
  EXPECT_EQ(body_of(r)["response"]["role"], "researcher");
  EXPECT_EQ(body_of(r)["options"][0]["label"], "Email reminders");
  auto opts = body_of(call(Role::instructor, "GET", "/v1/rubric/question/" + question + "/options"));
  EXPECT_EQ(opts["options"].size(), 3u);
  EXPECT_EQ(call(Role::instructor, "GET", "/v1/rubric/question/q99/options").status, 404);
}

// ---------------------------------------------------------------------------
// Over the wire

TEST(HttpServer, ServesApiOnEphemeralPort) {
  Engine engine(options());
  api::Service service(engine, kPrincipals);
  HttpServer server(service);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.listen(); });

  auto req = [&](std::string method, std::string path, std::string body, std::string token) {
    Request r{std::move(method), std::move(path), {}, {{"Authorization", "Bearer " + token}}, std::move(body)};
    return http_call("127.0.0.1", port, r);
  };
  auto created = req("POST", "/v1/mooclets", R"({"name":"wire"})", "tok-instructor");
  ASSERT_EQ(created.status, 201) << created.body;
  const std::string id = json::parse(created.body)["id"];
  ASSERT_EQ(req("POST", "/v1/mooclet/" + id + "/versions", R"({"name":"A","content":{"x":1}})", "tok-admin").status,
            201);
  Request run{"GET", "/v1/mooclet/" + id + "/run", {{"learner", "wire user"}}, {{"Authorization", "Bearer tok-platform"}}, ""};
  auto ran = http_call("127.0.0.1", port, run);
  ASSERT_EQ(ran.status, 200) << ran.body;
  EXPECT_EQ(json::parse(ran.body)["version"]["content"]["x"], 1);
  EXPECT_EQ(req("GET", "/v1/whoami", "", "bad").status, 401);
  EXPECT_EQ(req("POST", "/v1/value", "{}", "tok-researcher").status, 403);

  server.stop();
  loop.join();
  EXPECT_EQ(http_call("127.0.0.1", port, run).status, 503);
}
