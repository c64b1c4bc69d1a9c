#include "mooclet/variable_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "mooclet/csv.hpp"
#include "mooclet/errors.hpp"

namespace mooclet {

using nlohmann::json;

std::string_view to_string(VariableKind kind) noexcept {
  switch (kind) {
    case VariableKind::outcome: return "outcome";
    case VariableKind::covariate: return "covariate";
    case VariableKind::context: return "context";
    case VariableKind::system: return "system";
  }
  return "outcome";
}

std::string_view to_string(ValueType type) noexcept {
  switch (type) {
    case ValueType::number: return "number";
    case ValueType::text: return "text";
    case ValueType::boolean: return "boolean";
  }
  return "number";
}

std::optional<VariableKind> parse_variable_kind(std::string_view text) noexcept {
  if (text == "outcome") return VariableKind::outcome;
  if (text == "covariate") return VariableKind::covariate;
  if (text == "context") return VariableKind::context;
  if (text == "system") return VariableKind::system;
  return std::nullopt;
}

std::optional<ValueType> parse_value_type(std::string_view text) noexcept {
  if (text == "number") return ValueType::number;
  if (text == "text") return ValueType::text;
  if (text == "boolean") return ValueType::boolean;
  return std::nullopt;
}

std::string_view to_string(Aggregate agg) noexcept {
  switch (agg) {
    case Aggregate::count: return "count";
    case Aggregate::sum: return "sum";
    case Aggregate::mean: return "mean";
  }
  return "count";
}

std::optional<Aggregate> parse_aggregate(std::string_view text) noexcept {
  if (text == "count") return Aggregate::count;
  if (text == "sum") return Aggregate::sum;
  if (text == "mean") return Aggregate::mean;
  return std::nullopt;
}

ValueType type_of(const Value& value) noexcept {
  switch (value.index()) {
    case 0: return ValueType::number;
    case 1: return ValueType::text;
    default: return ValueType::boolean;
  }
}

std::string format_value(const Value& value) {
  if (const auto* d = std::get_if<double>(&value)) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *d);
    return std::string(buf, ptr);
  }
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return std::get<bool>(value) ? "true" : "false";
}

std::optional<Value> parse_value(std::string_view text, ValueType type) {
  switch (type) {
    case ValueType::number: {
      double d = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
      if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(d))
        return std::nullopt;
      return Value{d};
    }
    case ValueType::text:
      return Value{std::string(text)};
    case ValueType::boolean:
      if (text == "true") return Value{true};
      if (text == "false") return Value{false};
      return std::nullopt;
  }
  return std::nullopt;
}

json value_to_json(const Value& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

std::optional<Value> value_from_json(const json& j, ValueType type) {
  switch (type) {
    case ValueType::number:
      if (j.is_number() && std::isfinite(j.get<double>())) return Value{j.get<double>()};
      return std::nullopt;
    case ValueType::text:
      if (j.is_string()) return Value{j.get<std::string>()};
      return std::nullopt;
    case ValueType::boolean:
      if (j.is_boolean()) return Value{j.get<bool>()};
      return std::nullopt;
  }
  return std::nullopt;
}

bool ValueFilter::matches(const ValueRecord& record) const noexcept {
  if (learner && record.learner != *learner) return false;
  if (variable && record.variable != *variable) return false;
  if (from && record.timestamp < *from) return false;
  if (to && record.timestamp >= *to) return false;
  return true;
}

namespace {

bool may_read_records(Role role) {
  return role == Role::researcher || role == Role::instructor || role == Role::admin;
}

bool may_export(Role role) { return role == Role::researcher || role == Role::admin; }

bool record_order(const ValueRecord& a, const ValueRecord& b) {
  return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.seq < b.seq;
}

}  // namespace

VariableStore::VariableStore(ClockFn clock, std::uint64_t noise_seed, bool noise_test_mode)
    : stamper_(std::move(clock)), noise_(noise_seed), noise_test_mode_(noise_test_mode) {}

Variable VariableStore::define_variable(Variable variable) {
  if (variable.name.empty()) fail(ErrorCode::validation, "variable name must be nonempty");
  if (variable.bounds) {
    if (variable.value_type != ValueType::number)
      fail(ErrorCode::validation, "bounds apply only to number variables");
    if (!std::isfinite(variable.bounds->lo) || !std::isfinite(variable.bounds->hi) ||
        !(variable.bounds->lo < variable.bounds->hi))
      fail(ErrorCode::validation, "bounds must be finite with lo < hi");
  }
  std::unique_lock lock(mu_);
  if (variables_.contains(variable.name))
    fail(ErrorCode::conflict, "variable '" + variable.name + "' already defined");
  if (sink_) sink_({{"type", "variable.define"}, {"variable", variable}});
  apply_variable(variable);
  return variable;
}

void VariableStore::ensure_system_variable(const std::string& name, ValueType type,
                                           const std::string& description) {
  {
    std::shared_lock lock(mu_);
    if (variables_.contains(name)) return;
  }
  std::unique_lock lock(mu_);
  if (variables_.contains(name)) return;
  Variable v{name, VariableKind::system, type, description, std::nullopt};
  if (sink_) sink_({{"type", "variable.define"}, {"variable", v}});
  apply_variable(v);
}

std::vector<Variable> VariableStore::list_variables() const {
  std::shared_lock lock(mu_);
  std::vector<Variable> out;
  out.reserve(variables_.size());
  for (const auto& [name, v] : variables_) out.push_back(v);
  return out;
}

std::optional<Variable> VariableStore::find_variable(std::string_view name) const {
  std::shared_lock lock(mu_);
  auto it = variables_.find(name);
  if (it == variables_.end()) return std::nullopt;
  return it->second;
}

const Variable& VariableStore::require_variable(std::string_view name) const {
  auto it = variables_.find(name);
  if (it == variables_.end())
    fail(ErrorCode::not_found, "variable '" + std::string(name) + "' is not defined");
  return it->second;
}

ValueRecord VariableStore::push_value(const std::string& learner, const std::string& variable,
                                      const Value& value, std::optional<Provenance> provenance) {
  if (learner.empty()) fail(ErrorCode::validation, "learner must be nonempty");
  std::unique_lock lock(mu_);
  const Variable& var = require_variable(variable);
  if (type_of(value) != var.value_type)
    fail(ErrorCode::validation, "variable '" + variable + "' holds " +
                                    std::string(to_string(var.value_type)) + " values, got " +
                                    std::string(to_string(type_of(value))));
  if (const auto* d = std::get_if<double>(&value); d && !std::isfinite(*d))
    fail(ErrorCode::validation, "number values must be finite");
  ValueRecord record{records_.size() + 1, learner, variable, value, stamper_.next(),
                     std::move(provenance)};
  if (sink_) sink_({{"type", "value"}, {"record", record}});
  apply_record(record);
  return record;
}

void VariableStore::apply_variable(const Variable& variable) {
  variables_.insert_or_assign(variable.name, variable);
}

void VariableStore::apply_record(ValueRecord record) {
  stamper_.observe(record.timestamp);
  const auto key = std::make_pair(record.learner, record.variable);
  const bool in_order = records_.empty() || !record_order(record, records_.back());
  records_.push_back(std::move(record));
  if (in_order) {
    latest_[key] = records_.size() - 1;
    return;
  }
  std::stable_sort(records_.begin(), records_.end(), record_order);
  latest_.clear();
  for (std::size_t i = 0; i < records_.size(); ++i)
    latest_[{records_[i].learner, records_[i].variable}] = i;
}

std::vector<const ValueRecord*> VariableStore::matching(const ValueFilter& filter) const {
  std::vector<const ValueRecord*> out;
  for (const auto& r : records_)
    if (filter.matches(r)) out.push_back(&r);
  return out;
}

std::vector<ValueRecord> VariableStore::query_values(const ValueFilter& filter, Role role) const {
  if (!may_read_records(role))
    fail(ErrorCode::permission, "role '" + std::string(to_string(role)) + "' may not read records");
  std::shared_lock lock(mu_);
  std::vector<ValueRecord> out;
  for (const auto* r : matching(filter)) out.push_back(*r);
  return out;
}

std::optional<Value> VariableStore::latest_value(const std::string& learner,
                                                 const std::string& variable) const {
  std::shared_lock lock(mu_);
  auto it = latest_.find({learner, variable});
  if (it == latest_.end()) return std::nullopt;
  return records_[it->second].value;
}

std::size_t VariableStore::record_count() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

void VariableStore::set_budget(const std::string& principal, double epsilon_total) {
  if (!(epsilon_total >= 0.0) || !std::isfinite(epsilon_total))
    fail(ErrorCode::validation, "epsilon_total must be finite and nonnegative");
  std::lock_guard lock(budget_mu_);
  auto it = budgets_.find(principal);
  if (it != budgets_.end() && it->second.epsilon_total == epsilon_total) return;
  if (sink_) sink_({{"type", "budget.set"}, {"principal", principal}, {"epsilon_total", epsilon_total}});
  auto& b = budgets_[principal];
  b.principal = principal;
  b.epsilon_total = epsilon_total;
}

std::optional<PrivacyBudget> VariableStore::budget(const std::string& principal) const {
  std::lock_guard lock(budget_mu_);
  auto it = budgets_.find(principal);
  if (it == budgets_.end()) return std::nullopt;
  return it->second;
}

DpAnswer VariableStore::dp_aggregate(Aggregate aggregate, const std::string& variable,
                                     const ValueFilter& filter, double epsilon,
                                     const std::string& principal, Role role) {
  if (role != Role::researcher && role != Role::admin)
    fail(ErrorCode::permission, "role '" + std::string(to_string(role)) +
                                    "' may not spend privacy budget");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    fail(ErrorCode::validation, "epsilon must be positive and finite");

  // The budget lock is held from the check through the debit so that
  // concurrent queries can never overspend.
  std::lock_guard budget_lock(budget_mu_);
  auto it = budgets_.find(principal);
  if (it == budgets_.end())
    fail(ErrorCode::budget, "principal '" + principal + "' has no privacy budget");
  PrivacyBudget& budget = it->second;
  constexpr double kSlack = 1e-12;
  if (budget.epsilon_spent + epsilon > budget.epsilon_total + kSlack)
    fail(ErrorCode::budget, "privacy budget exhausted: remaining " +
                                std::to_string(budget.remaining()) + ", requested " +
                                std::to_string(epsilon));

  std::shared_lock lock(mu_);
  const Variable& var = require_variable(variable);
  ValueFilter scoped = filter;
  scoped.variable = variable;
  const auto rows = matching(scoped);
  const auto count = static_cast<double>(rows.size());

  double answer = 0.0;
  if (aggregate == Aggregate::count) {
    const double noise = noise_test_mode_ ? 0.0 : noise_.laplace(1.0 / epsilon);
    answer = count + noise;
  } else {
    if (var.value_type != ValueType::number || !var.bounds)
      fail(ErrorCode::validation, "variable '" + variable +
                                      "' has no clamp bounds; sum and mean need them");
    const auto [lo, hi] = *var.bounds;
    double sum = 0.0;
    for (const auto* r : rows) sum += std::clamp(std::get<double>(r->value), lo, hi);
    const double noise = noise_test_mode_ ? 0.0 : noise_.laplace((hi - lo) / epsilon);
    answer = sum + noise;
    if (aggregate == Aggregate::mean) answer /= std::max(count, 1.0);
  }

  budget.epsilon_spent += epsilon;
  if (sink_) sink_({{"type", "dp.spend"}, {"principal", principal}, {"epsilon", epsilon}});
  return {answer, budget};
}

std::string VariableStore::export_csv(const ValueFilter& filter, Role role) const {
  if (!may_export(role))
    fail(ErrorCode::permission, "role '" + std::string(to_string(role)) + "' may not export");
  std::shared_lock lock(mu_);
  std::string out = std::string(kExportHeader) + "\r\n";
  for (const auto* r : matching(filter)) {
    const Provenance p = r->provenance.value_or(Provenance{});
    out += csv::format_row({format_timestamp(r->timestamp), r->learner, r->variable,
                            format_value(r->value), p.mooclet, p.version, p.assignment});
  }
  return out;
}

std::size_t VariableStore::import_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || csv::format_row(rows.front()) != std::string(kExportHeader) + "\r\n")
    fail(ErrorCode::validation, "CSV header must be: " + std::string(kExportHeader));

  // Validate everything before appending anything.
  std::vector<ValueRecord> parsed;
  std::vector<Variable> system_vars;
  {
    std::shared_lock lock(mu_);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& row = rows[i];
      const std::string where = "CSV row " + std::to_string(i + 1);
      if (row.size() != 7) fail(ErrorCode::validation, where + ": expected 7 fields");
      auto ts = parse_timestamp(row[0]);
      if (!ts) fail(ErrorCode::validation, where + ": bad timestamp");
      ValueType type;
      if (auto it = variables_.find(row[2]); it != variables_.end()) {
        type = it->second.value_type;
      } else if (row[2].starts_with("version_of:")) {
        type = ValueType::text;
        if (std::none_of(system_vars.begin(), system_vars.end(),
                         [&](const Variable& v) { return v.name == row[2]; }))
          system_vars.push_back({row[2], VariableKind::system, ValueType::text,
                                 "version assigned by " + row[2].substr(11), std::nullopt});
      } else {
        fail(ErrorCode::not_found, where + ": variable '" + row[2] + "' is not defined");
      }
      auto value = parse_value(row[3], type);
      if (!value) fail(ErrorCode::validation, where + ": value does not match variable type");
      std::optional<Provenance> prov;
      if (!row[4].empty() || !row[5].empty() || !row[6].empty())
        prov = Provenance{row[4], row[5], row[6]};
      parsed.push_back({0, row[1], row[2], *value, *ts, prov});
    }
  }
  std::unique_lock lock(mu_);
  for (auto& v : system_vars) {
    if (variables_.contains(v.name)) continue;
    if (sink_) sink_({{"type", "variable.define"}, {"variable", v}});
    apply_variable(v);
  }
  for (auto& r : parsed) {
    r.seq = records_.size() + 1;
    if (sink_) sink_({{"type", "value"}, {"record", r}});
    apply_record(std::move(r));
  }
  return parsed.size();
}

void VariableStore::apply(const json& event) {
  const auto type = event.at("type").get<std::string>();
  if (type == "variable.define") {
    std::unique_lock lock(mu_);
    apply_variable(event.at("variable").get<Variable>());
  } else if (type == "value") {
    std::unique_lock lock(mu_);
    apply_record(event.at("record").get<ValueRecord>());
  } else if (type == "budget.set") {
    std::lock_guard lock(budget_mu_);
    const auto principal = event.at("principal").get<std::string>();
    auto& b = budgets_[principal];
    b.principal = principal;
    b.epsilon_total = event.at("epsilon_total").get<double>();
  } else if (type == "dp.spend") {
    std::lock_guard lock(budget_mu_);
    const auto principal = event.at("principal").get<std::string>();
    auto& b = budgets_[principal];
    b.principal = principal;
    b.epsilon_spent += event.at("epsilon").get<double>();
  }
}

json VariableStore::snapshot(const std::function<void()>& under_lock) const {
  std::lock_guard budget_lock(budget_mu_);
  std::shared_lock lock(mu_);
  json vars = json::array();
  for (const auto& [name, v] : variables_) vars.push_back(v);
  json budgets = json::array();
  for (const auto& [name, b] : budgets_) budgets.push_back(b);
  if (under_lock) under_lock();
  return {{"variables", vars}, {"records", records_}, {"budgets", budgets}};
}

void VariableStore::restore(const json& snapshot) {
  std::lock_guard budget_lock(budget_mu_);
  std::unique_lock lock(mu_);
  variables_.clear();
  records_.clear();
  latest_.clear();
  budgets_.clear();
  for (const auto& v : snapshot.at("variables")) apply_variable(v.get<Variable>());
  for (const auto& r : snapshot.at("records")) apply_record(r.get<ValueRecord>());
  for (const auto& b : snapshot.at("budgets")) {
    auto budget = b.get<PrivacyBudget>();
    budgets_[budget.principal] = budget;
  }
}

void to_json(json& j, const Variable& variable) {
  j = {{"name", variable.name},
       {"kind", to_string(variable.kind)},
       {"value_type", to_string(variable.value_type)},
       {"description", variable.description},
       {"bounds", variable.bounds ? json::array({variable.bounds->lo, variable.bounds->hi})
                                  : json(nullptr)}};
}

void from_json(const json& j, Variable& variable) {
  if (!j.is_object()) fail(ErrorCode::validation, "variable must be an object");
  if (!j.contains("name") || !j["name"].is_string())
    fail(ErrorCode::validation, "variable needs a string 'name'");
  variable.name = j["name"].get<std::string>();
  auto kind = parse_variable_kind(j.value("kind", std::string("outcome")));
  if (!kind) fail(ErrorCode::validation, "unknown variable kind");
  variable.kind = *kind;
  auto type = parse_value_type(j.value("value_type", std::string("number")));
  if (!type) fail(ErrorCode::validation, "unknown value_type");
  variable.value_type = *type;
  variable.description = j.value("description", std::string());
  variable.bounds.reset();
  if (j.contains("bounds") && !j["bounds"].is_null()) {
    const auto& b = j["bounds"];
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
      fail(ErrorCode::validation, "bounds must be [lo, hi]");
    variable.bounds = Bounds{b[0].get<double>(), b[1].get<double>()};
  }
}

void to_json(json& j, const ValueRecord& record) {
  j = {{"seq", record.seq},
       {"learner", record.learner},
       {"variable", record.variable},
       {"value", value_to_json(record.value)},
       {"timestamp", format_timestamp(record.timestamp)}};
  if (record.provenance)
    j["provenance"] = {{"mooclet", record.provenance->mooclet},
                       {"version", record.provenance->version},
                       {"assignment", record.provenance->assignment}};
  else
    j["provenance"] = nullptr;
}

void from_json(const json& j, ValueRecord& record) {
  record.seq = j.at("seq").get<std::uint64_t>();
  record.learner = j.at("learner").get<std::string>();
  record.variable = j.at("variable").get<std::string>();
  const auto& v = j.at("value");
  if (v.is_boolean()) record.value = v.get<bool>();
  else if (v.is_string()) record.value = v.get<std::string>();
  else record.value = v.get<double>();
  record.timestamp = parse_timestamp(j.at("timestamp").get<std::string>()).value();
  const auto& p = j.at("provenance");
  if (p.is_null()) record.provenance.reset();
  else record.provenance = Provenance{p.at("mooclet").get<std::string>(),
                                      p.at("version").get<std::string>(),
                                      p.at("assignment").get<std::string>()};
}

void to_json(json& j, const PrivacyBudget& budget) {
  j = {{"principal", budget.principal},
       {"epsilon_total", budget.epsilon_total},
       {"epsilon_spent", budget.epsilon_spent}};
}

void from_json(const json& j, PrivacyBudget& budget) {
  budget.principal = j.at("principal").get<std::string>();
  budget.epsilon_total = j.at("epsilon_total").get<double>();
  budget.epsilon_spent = j.at("epsilon_spent").get<double>();
}

}  // namespace mooclet
