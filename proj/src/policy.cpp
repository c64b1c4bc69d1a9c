#include "mooclet/policy.hpp"

#include <charconv>
#include <cmath>

#include "mooclet/errors.hpp"

namespace mooclet {

using nlohmann::json;

namespace {

void rebuild_posteriors(ArmTable& table, const PolicySpec& spec) {
  for (auto& [id, arm] : table) {
    arm.posterior.alpha = spec.prior_alpha + static_cast<double>(arm.successes);
    arm.posterior.beta = spec.prior_beta + static_cast<double>(arm.failures);
  }
}

}  // namespace

// Counters survive a policy change; posteriors are recomputed from the new
// prior so that alpha = prior_alpha + successes holds for every arm.
void PolicyState::reset(const PolicySpec& spec, const Mooclet& mooclet) {
  for (const auto& v : mooclet.versions)
    arms.try_emplace(v.id, ArmStats::from_prior(spec));
  rebuild_posteriors(arms, spec);
  for (auto& [key, row] : buckets) rebuild_posteriors(row, spec);
}

void PolicyState::add_arm(const PolicySpec& spec, const std::string& version_id) {
  arms.try_emplace(version_id, ArmStats::from_prior(spec));
  for (auto& [key, row] : buckets) row.try_emplace(version_id, ArmStats::from_prior(spec));
}

ArmTable& PolicyState::bucket(const PolicySpec& spec, const Mooclet& mooclet,
                              const std::string& key) {
  auto& row = buckets[key];
  for (const auto& v : mooclet.versions) row.try_emplace(v.id, ArmStats::from_prior(spec));
  return row;
}

std::string_view to_string(AssignmentReason reason) noexcept {
  switch (reason) {
    case AssignmentReason::policy: return "policy";
    case AssignmentReason::pin: return "pin";
    case AssignmentReason::sticky: return "sticky";
  }
  return "policy";
}

std::size_t choose_uniform(std::size_t count, RandomSource& rng) {
  if (count == 0) fail(ErrorCode::no_versions, "no versions to choose from");
  const auto index = static_cast<std::size_t>(rng.uniform() * static_cast<double>(count));
  return std::min(index, count - 1);
}

std::size_t choose_weighted(std::span<const double> weights, RandomSource& rng) {
  if (weights.empty()) fail(ErrorCode::no_versions, "no versions to choose from");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      fail(ErrorCode::validation, "weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) fail(ErrorCode::validation, "weights sum to zero");
  const double target = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  // Rounding can leave target == acc at the end.
  return last_positive;
}

std::size_t choose_thompson(std::span<const BetaPosterior> posteriors, RandomSource& rng) {
  if (posteriors.empty()) fail(ErrorCode::no_versions, "no versions to choose from");
  for (const auto& p : posteriors)
    if (!(p.alpha > 0.0) || !(p.beta > 0.0))
      fail(ErrorCode::state_corruption, "posterior parameters must be positive");
  std::size_t best = 0;
  double best_draw = -1.0;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const double draw = rng.beta(posteriors[i].alpha, posteriors[i].beta);
    if (draw > best_draw) {
      best = i;
      best_draw = draw;
    }
  }
  return best;
}

std::size_t choose_contextual(const std::string& bucket_key,
                              std::map<std::string, ArmTable>& table,
                              const std::vector<std::string>& version_ids,
                              const BetaPosterior& prior, RandomSource& rng) {
  if (version_ids.empty()) fail(ErrorCode::no_versions, "no versions to choose from");
  auto& row = table[bucket_key];
  std::vector<BetaPosterior> posteriors;
  posteriors.reserve(version_ids.size());
  for (const auto& id : version_ids) {
    auto [it, inserted] = row.try_emplace(id, ArmStats{0, 0, 0, prior});
    posteriors.push_back(it->second.posterior);
  }
  return choose_thompson(posteriors, rng);
}

std::string bucket_key(const json& value) {
  if (value.is_null()) return std::string(kMissingBucket);
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number()) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value.get<double>());
    return std::string(buf, ptr);
  }
  return value.dump();
}

void to_json(json& j, const ArmStats& arm) {
  j = {{"assignments", arm.assignments},
       {"successes", arm.successes},
       {"failures", arm.failures},
       {"alpha", arm.posterior.alpha},
       {"beta", arm.posterior.beta}};
}

void from_json(const json& j, ArmStats& arm) {
  arm.assignments = j.at("assignments").get<std::uint64_t>();
  arm.successes = j.at("successes").get<std::uint64_t>();
  arm.failures = j.at("failures").get<std::uint64_t>();
  arm.posterior.alpha = j.at("alpha").get<double>();
  arm.posterior.beta = j.at("beta").get<double>();
}

void to_json(json& j, const PolicyState& state) {
  j = {{"arms", state.arms}, {"buckets", state.buckets}};
}

void from_json(const json& j, PolicyState& state) {
  state.arms = j.at("arms").get<ArmTable>();
  state.buckets = j.at("buckets").get<std::map<std::string, ArmTable>>();
}

void to_json(json& j, const AssignmentRecord& record) {
  j = {{"id", record.id},
       {"learner", record.learner},
       {"mooclet", record.mooclet},
       {"version", record.version},
       {"policy", to_string(record.policy)},
       {"reason", to_string(record.reason)},
       {"timestamp", format_timestamp(record.timestamp)},
       {"context", record.context}};
}

void from_json(const json& j, AssignmentRecord& record) {
  record.id = j.at("id").get<std::string>();
  record.learner = j.at("learner").get<std::string>();
  record.mooclet = j.at("mooclet").get<std::string>();
  record.version = j.at("version").get<std::string>();
  record.policy = parse_policy_kind(j.at("policy").get<std::string>()).value();
  const auto reason = j.at("reason").get<std::string>();
  record.reason = reason == "pin"      ? AssignmentReason::pin
                  : reason == "sticky" ? AssignmentReason::sticky
                                       : AssignmentReason::policy;
  record.timestamp = parse_timestamp(j.at("timestamp").get<std::string>()).value();
  record.context = j.value("context", json::object());
}

}  // namespace mooclet
