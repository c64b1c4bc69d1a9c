#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mooclet/clock.hpp"
#include "mooclet/journal.hpp"
#include "mooclet/policy.hpp"
#include "mooclet/pseudonym.hpp"
#include "mooclet/random.hpp"
#include "mooclet/registry.hpp"
#include "mooclet/rubric.hpp"
#include "mooclet/variable_store.hpp"

namespace mooclet {

struct EngineOptions {
  std::optional<std::filesystem::path> data_dir;
  std::uint64_t seed = 0;
  bool noise_test_mode = false;
  // Full snapshot after this many journaled events; 0 disables.
  std::uint64_t snapshot_every = 1000;
  // Empty: read or create <data_dir>/pseudonym.key, or derive from the seed
  // for in-memory engines.
  std::string pseudonym_key;
  ClockFn clock = system_now;
};

struct Assignment {
  Version version;
  AssignmentRecord record;
};

struct VersionStats {
  std::string id;
  std::string name;
  double weight = 1.0;
  bool archived = false;
  bool pinned = false;
  std::uint64_t assignments = 0;
  std::uint64_t successes = 0;
  std::uint64_t failures = 0;
  std::optional<double> outcome_mean;
};

struct MoocletStats {
  std::string mooclet;
  PolicyKind policy = PolicyKind::uniform_random;
  std::optional<std::string> pinned_version;
  Timestamp pin_updated_at = 0;
  std::uint64_t total_assignments = 0;
  std::vector<VersionStats> versions;
};

void to_json(nlohmann::json& j, const VersionStats& stats);
void to_json(nlohmann::json& j, const MoocletStats& stats);

inline std::string version_variable(std::string_view mooclet_id) {
  return "version_of:" + std::string(mooclet_id);
}

// The MOOClet engine: registry, policy engine, User Variable Store and rubric
// behind one journaled, thread-safe facade.
//
// Operations on one MOOClet are serialized by that MOOClet's lock; operations
// on different MOOClets run in parallel. Learner identities passed in are raw
// platform identities and are pseudonymized before anything is recorded.
class Engine {
 public:
  explicit Engine(EngineOptions options = {});
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // mooclet-core
  Mooclet create_mooclet(const std::string& name, PolicySpec policy,
                         bool sticky = true);
  Version add_version(const std::string& mooclet_id, const std::string& name,
                      std::string content, double weight = 1.0);
  Version update_version(const std::string& mooclet_id,
                         const std::string& version_id,
                         std::optional<double> weight,
                         std::optional<bool> archived);
  Mooclet set_policy(const std::string& mooclet_id, PolicySpec policy);
  Mooclet pin_version(const std::string& mooclet_id,
                      std::optional<std::string> version_id);
  Mooclet get_mooclet(const std::string& mooclet_id) const;
  std::vector<Mooclet> list_mooclets() const;

  // policy-engine
  //
  // `context` overrides store lookups for the variables a contextual policy
  // consults (variable name -> JSON value).
  Assignment assign(const std::string& mooclet_id, const std::string& learner,
                    const nlohmann::json& context = nlohmann::json::object());
  // Attributes a 0/1 outcome to the learner's latest unrewarded assignment
  // of `version_id`, or to `assignment_id` when given.
  PolicyState update_reward(const std::string& mooclet_id,
                            const std::string& version_id,
                            const std::string& learner, int outcome,
                            std::optional<std::string> assignment_id = std::nullopt);
  PolicyState policy_state(const std::string& mooclet_id) const;
  MoocletStats stats(const std::string& mooclet_id) const;
  std::vector<AssignmentRecord> assignment_log() const;
  // One JSON object per line; the same bytes as <data_dir>/assignments.log.
  std::string assignment_log_text() const;

  // variable-store entry points that take raw learner identities.
  ValueRecord push_value(const std::string& learner, const std::string& variable,
                         const Value& value,
                         std::optional<Provenance> provenance = std::nullopt);
  std::string pseudonym(const std::string& learner) const;

  VariableStore& store() noexcept { return store_; }
  const VariableStore& store() const noexcept { return store_; }
  Rubric& rubric() noexcept { return rubric_; }
  const Rubric& rubric() const noexcept { return rubric_; }

  std::uint64_t seed() const noexcept { return options_.seed; }

  // Writes a full snapshot now (no-op without a data directory).
  void checkpoint();
  nlohmann::json state() const;

 private:
  struct Slot;

  Slot& slot(const std::string& mooclet_id) const;
  void journal(const nlohmann::json& event);
  void maybe_checkpoint();
  void replay(const nlohmann::json& event);
  void restore(const nlohmann::json& state);
  nlohmann::json state_locked(nlohmann::json store, nlohmann::json rubric) const;
  void apply_assignment(Slot& s, const AssignmentRecord& record);
  void apply_reward(Slot& s, const std::string& assignment_id, int outcome);
  void append_assignment_log(const AssignmentRecord& record);
  void validate_policy_context(const PolicySpec& spec) const;
  static void observe_id(std::atomic<std::uint64_t>& counter, const std::string& id);

  EngineOptions options_;
  Journal journal_;
  std::unique_ptr<Pseudonymizer> pseudonymizer_;
  Stamper stamper_;
  VariableStore store_;
  Rubric rubric_;

  // Shared by every operation, exclusive while a snapshot is taken.
  mutable std::shared_mutex world_;

  mutable std::shared_mutex slots_mu_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
  std::vector<std::string> slot_order_;

  mutable std::mutex log_mu_;
  std::vector<AssignmentRecord> log_;
  std::map<std::string, std::size_t> log_index_;
  std::string log_text_;
  std::ofstream log_file_;

  std::atomic<std::uint64_t> next_mooclet_{1};
  std::atomic<std::uint64_t> next_version_{1};
  std::atomic<std::uint64_t> next_assignment_{1};
  bool replaying_ = false;
};

}  // namespace mooclet
