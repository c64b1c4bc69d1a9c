#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mooclet/clock.hpp"
#include "mooclet/principal.hpp"
#include "mooclet/random.hpp"

namespace mooclet {

enum class VariableKind { outcome, covariate, context, system };
enum class ValueType { number, text, boolean };

std::string_view to_string(VariableKind kind) noexcept;
std::string_view to_string(ValueType type) noexcept;
std::optional<VariableKind> parse_variable_kind(std::string_view text) noexcept;
std::optional<ValueType> parse_value_type(std::string_view text) noexcept;

using Value = std::variant<double, std::string, bool>;

ValueType type_of(const Value& value) noexcept;
std::string format_value(const Value& value);
// Parses the text form produced by format_value for a declared type.
std::optional<Value> parse_value(std::string_view text, ValueType type);
nlohmann::json value_to_json(const Value& value);
// Accepts only JSON of the matching type.
std::optional<Value> value_from_json(const nlohmann::json& j, ValueType type);

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Bounds&) const = default;
};

struct Variable {
  std::string name;
  VariableKind kind = VariableKind::outcome;
  ValueType value_type = ValueType::number;
  std::string description;
  std::optional<Bounds> bounds;  // required for noisy sum and mean
  bool operator==(const Variable&) const = default;
};

struct Provenance {
  std::string mooclet;
  std::string version;
  std::string assignment;
  bool operator==(const Provenance&) const = default;
};

struct ValueRecord {
  std::uint64_t seq = 0;  // append order, breaks timestamp ties
  std::string learner;    // pseudonym
  std::string variable;
  Value value;
  Timestamp timestamp = 0;
  std::optional<Provenance> provenance;
  bool operator==(const ValueRecord&) const = default;
};

struct ValueFilter {
  std::optional<std::string> learner;
  std::optional<std::string> variable;
  std::optional<Timestamp> from;  // inclusive
  std::optional<Timestamp> to;    // exclusive

  bool matches(const ValueRecord& record) const noexcept;
};

enum class Aggregate { count, sum, mean };
std::string_view to_string(Aggregate agg) noexcept;
std::optional<Aggregate> parse_aggregate(std::string_view text) noexcept;

struct PrivacyBudget {
  std::string principal;
  double epsilon_total = 0.0;
  double epsilon_spent = 0.0;
  double remaining() const noexcept { return epsilon_total - epsilon_spent; }
  bool operator==(const PrivacyBudget&) const = default;
};

struct DpAnswer {
  double value = 0.0;
  PrivacyBudget budget;  // after the debit
};

inline constexpr std::string_view kExportHeader =
    "timestamp,learner,variable,value,mooclet,version,assignment";

// The User Variable Store. Append-only, thread-safe, and journaled through
// an optional sink that sees every state change as a JSON event while the
// store's lock is held.
class VariableStore {
 public:
  using Sink = std::function<void(const nlohmann::json&)>;

  VariableStore(ClockFn clock, std::uint64_t noise_seed, bool noise_test_mode);

  void set_sink(Sink sink) { sink_ = std::move(sink); }

  Variable define_variable(Variable variable);
  // Defines a system variable unless one with that name already exists.
  void ensure_system_variable(const std::string& name, ValueType type,
                              const std::string& description);
  std::vector<Variable> list_variables() const;
  std::optional<Variable> find_variable(std::string_view name) const;

  ValueRecord push_value(const std::string& learner, const std::string& variable,
                         const Value& value,
                         std::optional<Provenance> provenance = std::nullopt);

  std::vector<ValueRecord> query_values(const ValueFilter& filter, Role role) const;
  // Most recent value of a variable for one learner.
  std::optional<Value> latest_value(const std::string& learner,
                                    const std::string& variable) const;
  std::size_t record_count() const;

  void set_budget(const std::string& principal, double epsilon_total);
  std::optional<PrivacyBudget> budget(const std::string& principal) const;
  DpAnswer dp_aggregate(Aggregate aggregate, const std::string& variable,
                        const ValueFilter& filter, double epsilon,
                        const std::string& principal, Role role);

  std::string export_csv(const ValueFilter& filter, Role role) const;
  // Restores records from an export; variables must already be defined
  // except version_of:* system variables. Timestamps are kept.
  std::size_t import_csv(std::string_view csv);

  // Event application, used for journal replay.
  void apply(const nlohmann::json& event);
  // `under_lock` runs while the store is still locked, so that callers can
  // pair the snapshot with a consistent journal position.
  nlohmann::json snapshot(const std::function<void()>& under_lock = {}) const;
  void restore(const nlohmann::json& snapshot);

  bool noise_test_mode() const noexcept { return noise_test_mode_; }

 private:
  void apply_variable(const Variable& variable);
  void apply_record(ValueRecord record);
  const Variable& require_variable(std::string_view name) const;
  std::vector<const ValueRecord*> matching(const ValueFilter& filter) const;

  mutable std::shared_mutex mu_;
  mutable std::mutex budget_mu_;  // also guards noise_; taken before mu_
  Stamper stamper_;
  RandomSource noise_;
  bool noise_test_mode_;
  Sink sink_;

  std::map<std::string, Variable, std::less<>> variables_;
  std::vector<ValueRecord> records_;  // in timestamp order
  std::map<std::pair<std::string, std::string>, std::size_t> latest_;
  std::map<std::string, PrivacyBudget, std::less<>> budgets_;
};

void to_json(nlohmann::json& j, const Variable& variable);
void from_json(const nlohmann::json& j, Variable& variable);
void to_json(nlohmann::json& j, const ValueRecord& record);
void from_json(const nlohmann::json& j, ValueRecord& record);
void to_json(nlohmann::json& j, const PrivacyBudget& budget);
void from_json(const nlohmann::json& j, PrivacyBudget& budget);

}  // namespace mooclet
