#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mooclet/clock.hpp"

namespace mooclet {

enum class PolicyKind {
  uniform_random,
  weighted_random,
  pinned,
  thompson_bernoulli,
  contextual_thompson,
};

std::string_view to_string(PolicyKind kind) noexcept;
std::optional<PolicyKind> parse_policy_kind(std::string_view text) noexcept;

// Which assignment rule is active plus its kind-specific parameters. Unused
// parameters are ignored for kinds that do not read them.
struct PolicySpec {
  PolicyKind kind = PolicyKind::uniform_random;
  double prior_alpha = 1.0;
  double prior_beta = 1.0;
  std::string context_variable;  // contextual_thompson
  std::string version;           // pinned

  static PolicySpec uniform() { return {}; }
  static PolicySpec weighted() { return of(PolicyKind::weighted_random); }
  static PolicySpec pinned_to(std::string version_id) {
    auto s = of(PolicyKind::pinned);
    s.version = std::move(version_id);
    return s;
  }
  static PolicySpec thompson(double alpha = 1.0, double beta = 1.0) {
    auto s = of(PolicyKind::thompson_bernoulli);
    s.prior_alpha = alpha;
    s.prior_beta = beta;
    return s;
  }
  static PolicySpec contextual(std::string variable, double alpha = 1.0, double beta = 1.0) {
    auto s = thompson(alpha, beta);
    s.kind = PolicyKind::contextual_thompson;
    s.context_variable = std::move(variable);
    return s;
  }
  static PolicySpec of(PolicyKind kind) {
    PolicySpec s;
    s.kind = kind;
    return s;
  }

  bool operator==(const PolicySpec&) const = default;
};

struct Version {
  std::string id;
  std::string name;
  std::string content;  // opaque, stored byte for byte
  double weight = 1.0;
  bool archived = false;

  bool assignable() const noexcept { return !archived; }
  bool operator==(const Version&) const = default;
};

struct Mooclet {
  std::string id;
  std::string name;
  std::vector<Version> versions;
  PolicySpec policy;
  std::optional<std::string> pinned_version;
  Timestamp pin_updated_at = 0;
  bool sticky = true;

  const Version* find_version(std::string_view version_id) const noexcept;
  // Position of a version in creation order; the tie-break order.
  std::optional<std::size_t> version_index(std::string_view version_id) const noexcept;
  bool has_assignable_version() const noexcept;

  bool operator==(const Mooclet&) const = default;
};

// Kind/parameter checks that need no outside knowledge (priors positive,
// pinned target present in `mooclet`). Contextual variables are checked by
// the engine against the variable catalog.
void validate_policy(const PolicySpec& spec, const Mooclet& mooclet);

void to_json(nlohmann::json& j, const PolicySpec& spec);
void from_json(const nlohmann::json& j, PolicySpec& spec);
void to_json(nlohmann::json& j, const Version& version);
void from_json(const nlohmann::json& j, Version& version);
void to_json(nlohmann::json& j, const Mooclet& mooclet);
void from_json(const nlohmann::json& j, Mooclet& mooclet);

}  // namespace mooclet
