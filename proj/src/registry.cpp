#include "mooclet/registry.hpp"

#include <cmath>

#include "mooclet/errors.hpp"

namespace mooclet {

using nlohmann::json;

std::string_view to_string(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::uniform_random: return "uniform_random";
    case PolicyKind::weighted_random: return "weighted_random";
    case PolicyKind::pinned: return "pinned";
    case PolicyKind::thompson_bernoulli: return "thompson_bernoulli";
    case PolicyKind::contextual_thompson: return "contextual_thompson";
  }
  return "uniform_random";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view text) noexcept {
  // Short aliases are accepted for the command line.
  if (text == "uniform_random" || text == "uniform") return PolicyKind::uniform_random;
  if (text == "weighted_random" || text == "weighted") return PolicyKind::weighted_random;
  if (text == "pinned") return PolicyKind::pinned;
  if (text == "thompson_bernoulli" || text == "thompson") return PolicyKind::thompson_bernoulli;
  if (text == "contextual_thompson" || text == "contextual") return PolicyKind::contextual_thompson;
  return std::nullopt;
}

const Version* Mooclet::find_version(std::string_view version_id) const noexcept {
  for (const auto& v : versions)
    if (v.id == version_id) return &v;
  return nullptr;
}

std::optional<std::size_t> Mooclet::version_index(std::string_view version_id) const noexcept {
  for (std::size_t i = 0; i < versions.size(); ++i)
    if (versions[i].id == version_id) return i;
  return std::nullopt;
}

bool Mooclet::has_assignable_version() const noexcept {
  for (const auto& v : versions)
    if (v.assignable()) return true;
  return false;
}

void validate_policy(const PolicySpec& spec, const Mooclet& mooclet) {
  if (!(spec.prior_alpha > 0.0) || !std::isfinite(spec.prior_alpha) ||
      !(spec.prior_beta > 0.0) || !std::isfinite(spec.prior_beta))
    fail(ErrorCode::validation, "prior alpha and beta must be positive and finite");
  switch (spec.kind) {
    case PolicyKind::pinned: {
      if (spec.version.empty())
        fail(ErrorCode::validation, "pinned policy requires a version parameter");
      const Version* v = mooclet.find_version(spec.version);
      if (v == nullptr)
        fail(ErrorCode::validation,
             "pinned policy names version '" + spec.version + "' which is not in mooclet " +
                 mooclet.id);
      if (v->archived)
        fail(ErrorCode::validation, "pinned policy names an archived version");
      break;
    }
    case PolicyKind::contextual_thompson:
      if (spec.context_variable.empty())
        fail(ErrorCode::validation, "contextual policy requires a context_variable parameter");
      break;
    default:
      break;
  }
}

void to_json(json& j, const PolicySpec& spec) {
  json params = json::object();
  switch (spec.kind) {
    case PolicyKind::thompson_bernoulli:
      params = {{"alpha", spec.prior_alpha}, {"beta", spec.prior_beta}};
      break;
    case PolicyKind::contextual_thompson:
      params = {{"alpha", spec.prior_alpha},
                {"beta", spec.prior_beta},
                {"context_variable", spec.context_variable}};
      break;
    case PolicyKind::pinned:
      params = {{"version", spec.version}};
      break;
    default:
      break;
  }
  j = {{"kind", to_string(spec.kind)}, {"parameters", params}};
}

void from_json(const json& j, PolicySpec& spec) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    fail(ErrorCode::validation, "policy must be an object with a string 'kind'");
  auto kind = parse_policy_kind(j["kind"].get<std::string>());
  if (!kind) fail(ErrorCode::validation, "unknown policy kind '" + j["kind"].get<std::string>() + "'");
  spec = PolicySpec::of(*kind);
  const json params = j.value("parameters", json::object());
  if (!params.is_object()) fail(ErrorCode::validation, "policy parameters must be an object");
  auto number = [&](const char* key, double fallback) {
    if (!params.contains(key)) return fallback;
    if (!params[key].is_number()) fail(ErrorCode::validation, std::string("parameter '") + key + "' must be a number");
    return params[key].get<double>();
  };
  auto text = [&](const char* key) -> std::string {
    if (!params.contains(key)) return {};
    if (!params[key].is_string()) fail(ErrorCode::validation, std::string("parameter '") + key + "' must be a string");
    return params[key].get<std::string>();
  };
  spec.prior_alpha = number("alpha", 1.0);
  spec.prior_beta = number("beta", 1.0);
  spec.context_variable = text("context_variable");
  spec.version = text("version");
}

void to_json(json& j, const Version& version) {
  j = {{"id", version.id},
       {"name", version.name},
       {"content", version.content},
       {"weight", version.weight},
       {"archived", version.archived}};
}

void from_json(const json& j, Version& version) {
  version.id = j.at("id").get<std::string>();
  version.name = j.at("name").get<std::string>();
  version.content = j.at("content").get<std::string>();
  version.weight = j.at("weight").get<double>();
  version.archived = j.value("archived", false);
}

void to_json(json& j, const Mooclet& mooclet) {
  j = {{"id", mooclet.id},
       {"name", mooclet.name},
       {"versions", mooclet.versions},
       {"policy", mooclet.policy},
       {"pinned_version", mooclet.pinned_version ? json(*mooclet.pinned_version) : json(nullptr)},
       {"pin_updated_at", mooclet.pin_updated_at},
       {"sticky", mooclet.sticky}};
}

void from_json(const json& j, Mooclet& mooclet) {
  mooclet.id = j.at("id").get<std::string>();
  mooclet.name = j.at("name").get<std::string>();
  mooclet.versions = j.at("versions").get<std::vector<Version>>();
  mooclet.policy = j.at("policy").get<PolicySpec>();
  const auto& pin = j.at("pinned_version");
  mooclet.pinned_version =
      pin.is_null() ? std::nullopt : std::optional<std::string>(pin.get<std::string>());
  mooclet.pin_updated_at = j.value("pin_updated_at", Timestamp{0});
  mooclet.sticky = j.at("sticky").get<bool>();
}

}  // namespace mooclet
