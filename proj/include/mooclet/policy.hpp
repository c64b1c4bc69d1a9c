#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mooclet/clock.hpp"
#include "mooclet/random.hpp"
#include "mooclet/registry.hpp"

namespace mooclet {

// Bucket used by contextual policies when a learner has no value for the
// declared context variable.
inline constexpr std::string_view kMissingBucket = "⊥";

struct BetaPosterior {
  double alpha = 1.0;
  double beta = 1.0;
  bool operator==(const BetaPosterior&) const = default;
};

struct ArmStats {
  std::uint64_t assignments = 0;
  std::uint64_t successes = 0;
  std::uint64_t failures = 0;
  BetaPosterior posterior;

  static ArmStats from_prior(const PolicySpec& spec) {
    return {0, 0, 0, {spec.prior_alpha, spec.prior_beta}};
  }
  bool operator==(const ArmStats&) const = default;
};

using ArmTable = std::map<std::string, ArmStats>;  // keyed by version id

// Mutable statistics of one MOOClet's active policy. `arms` aggregates over
// all learners; `buckets` holds the per-context tables of contextual kinds.
struct PolicyState {
  ArmTable arms;
  std::map<std::string, ArmTable> buckets;

  void reset(const PolicySpec& spec, const Mooclet& mooclet);
  void add_arm(const PolicySpec& spec, const std::string& version_id);
  // Row for a context value, created at the prior on first use.
  ArmTable& bucket(const PolicySpec& spec, const Mooclet& mooclet,
                   const std::string& key);

  bool operator==(const PolicyState&) const = default;
};

// Why an assignment resolved the way it did.
enum class AssignmentReason { policy, pin, sticky };

std::string_view to_string(AssignmentReason reason) noexcept;

struct AssignmentRecord {
  std::string id;
  std::string learner;  // pseudonym
  std::string mooclet;
  std::string version;
  PolicyKind policy = PolicyKind::uniform_random;
  AssignmentReason reason = AssignmentReason::policy;
  Timestamp timestamp = 0;
  // Variables the policy consulted; a null value marks a missing one.
  nlohmann::json context = nlohmann::json::object();

  bool operator==(const AssignmentRecord&) const = default;
};

// Choice functions. Each returns an index into its input and draws only from
// `rng`; ties resolve to the lowest index.

std::size_t choose_uniform(std::size_t count, RandomSource& rng);

// Probability of index i is weights[i] / sum(weights).
std::size_t choose_weighted(std::span<const double> weights, RandomSource& rng);

// Samples one value from each posterior and returns the argmax.
std::size_t choose_thompson(std::span<const BetaPosterior> posteriors,
                            RandomSource& rng);

// Thompson selection restricted to the row for `bucket_key`; `version_ids`
// lists the candidates in tie-break order.
std::size_t choose_contextual(const std::string& bucket_key,
                              std::map<std::string, ArmTable>& table,
                              const std::vector<std::string>& version_ids,
                              const BetaPosterior& prior, RandomSource& rng);

// Text key of a context value: numbers in shortest round-trip form,
// booleans as true/false, strings verbatim, null as the missing bucket.
std::string bucket_key(const nlohmann::json& value);

void to_json(nlohmann::json& j, const ArmStats& arm);
void from_json(const nlohmann::json& j, ArmStats& arm);
void to_json(nlohmann::json& j, const PolicyState& state);
void from_json(const nlohmann::json& j, PolicyState& state);
void to_json(nlohmann::json& j, const AssignmentRecord& record);
void from_json(const nlohmann::json& j, AssignmentRecord& record);

}  // namespace mooclet
