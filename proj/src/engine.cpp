#include "mooclet/engine.hpp"

#include <cmath>
#include <fstream>

#include "mooclet/errors.hpp"

namespace mooclet {

namespace fs = std::filesystem;
using nlohmann::json;

struct Engine::Slot {
  std::mutex mu;
  Mooclet mooclet;
  PolicyState state;
  RandomSource rng;
  // Version a learner keeps under a sticky mooclet.
  std::map<std::string, std::string> sticky;
  // (learner, version) -> assignment ids in log order, for reward attribution.
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> attempts;
  std::set<std::string> rewarded;
};

namespace {

std::string load_or_create_key(const fs::path& dir) {
  const auto path = dir / "pseudonym.key";
  if (std::ifstream in(path); in) {
    std::string key;
    std::getline(in, key);
    if (!key.empty()) return key;
  }
  auto key = Pseudonymizer::random_key();
  fs::create_directories(dir);
  std::ofstream out(path, std::ios::trunc);
  out << key << '\n';
  if (!out) fail(ErrorCode::internal, "cannot write " + path.string());
  fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write);
  return key;
}

std::uint64_t numeric_suffix(const std::string& id) {
  std::uint64_t n = 0;
  for (std::size_t i = 1; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return 0;
    n = n * 10 + static_cast<std::uint64_t>(id[i] - '0');
  }
  return n;
}

void require_nonnegative_weight(double weight) {
  if (!(weight >= 0.0) || !std::isfinite(weight))
    fail(ErrorCode::validation, "weight must be finite and nonnegative");
}

}  // namespace

void to_json(json& j, const VersionStats& s) {
  j = {{"id", s.id},
       {"name", s.name},
       {"weight", s.weight},
       {"archived", s.archived},
       {"pinned", s.pinned},
       {"assignments", s.assignments},
       {"successes", s.successes},
       {"failures", s.failures},
       {"outcome_mean", s.outcome_mean ? json(*s.outcome_mean) : json(nullptr)}};
}

void to_json(json& j, const MoocletStats& s) {
  j = {{"mooclet", s.mooclet},
       {"policy", to_string(s.policy)},
       {"pinned_version", s.pinned_version ? json(*s.pinned_version) : json(nullptr)},
       {"pin_updated_at", s.pin_updated_at ? json(format_timestamp(s.pin_updated_at)) : json(nullptr)},
       {"total_assignments", s.total_assignments},
       {"versions", s.versions}};
}

Engine::Engine(EngineOptions options)
    : options_(std::move(options)),
      journal_(options_.data_dir),
      stamper_(options_.clock),
      store_(options_.clock, RandomSource::derived(options_.seed, 0xd9)(), options_.noise_test_mode),
      rubric_(options_.clock) {
  std::string key = options_.pseudonym_key;
  if (key.empty())
    key = options_.data_dir ? load_or_create_key(*options_.data_dir)
                            : "seed:" + std::to_string(options_.seed);
  pseudonymizer_ = std::make_unique<Pseudonymizer>(std::move(key));

  store_.set_sink([this](const json& e) { journal(e); });
  rubric_.set_sink([this](const json& e) { journal(e); });

  if (options_.data_dir) {
    replaying_ = true;
    journal_.load([this](const json& state) { restore(state); },
                  [this](const json& event) { replay(event); });
    replaying_ = false;
    const auto path = *options_.data_dir / "assignments.log";
    std::ofstream(path, std::ios::trunc | std::ios::binary) << log_text_;
    log_file_.open(path, std::ios::app | std::ios::binary);
  }
}

Engine::~Engine() = default;

void Engine::journal(const json& event) {
  if (!replaying_) journal_.append(event);
}

void Engine::observe_id(std::atomic<std::uint64_t>& counter, const std::string& id) {
  const auto next = numeric_suffix(id) + 1;
  auto cur = counter.load();
  while (cur < next && !counter.compare_exchange_weak(cur, next)) {
  }
}

Engine::Slot& Engine::slot(const std::string& mooclet_id) const {
  std::shared_lock lock(slots_mu_);
  auto it = slots_.find(mooclet_id);
  if (it == slots_.end()) fail(ErrorCode::not_found, "mooclet '" + mooclet_id + "' not found");
  return *it->second;
}

void Engine::validate_policy_context(const PolicySpec& spec) const {
  if (spec.kind != PolicyKind::contextual_thompson) return;
  if (!store_.find_variable(spec.context_variable))
    fail(ErrorCode::validation,
         "context variable '" + spec.context_variable + "' is not declared in the variable store");
}

void Engine::maybe_checkpoint() {
  if (!journal_.persistent() || options_.snapshot_every == 0) return;
  if (journal_.seq() - journal_.snapshot_seq() < options_.snapshot_every) return;
  checkpoint();
}

void Engine::checkpoint() {
  if (!journal_.persistent()) return;
  std::unique_lock world(world_);
  // Store and rubric writes journal under their own locks, so the journal
  // position is read while both are held.
  std::uint64_t seq = 0;
  json rubric;
  json store = store_.snapshot([&] { rubric = rubric_.snapshot([&] { seq = journal_.seq(); }); });
  if (seq == journal_.snapshot_seq()) return;
  journal_.write_snapshot(seq, state_locked(std::move(store), std::move(rubric)));
}

// ---------------------------------------------------------------------------
// mooclet-core

Mooclet Engine::create_mooclet(const std::string& name, PolicySpec policy, bool sticky) {
  Mooclet m;
  {
    std::shared_lock world(world_);
    if (name.find_first_not_of(" \t\r\n") == std::string::npos)
      fail(ErrorCode::validation, "mooclet name must be nonempty");
    m.name = name;
    m.policy = policy;
    m.sticky = sticky;
    if (policy.kind == PolicyKind::pinned)
      fail(ErrorCode::validation,
           "a pinned policy needs an existing version; add versions, then set the policy");
    validate_policy(policy, m);
    validate_policy_context(policy);

    std::unique_lock lock(slots_mu_);
    m.id = "m" + std::to_string(next_mooclet_++);
    journal({{"type", "mooclet.create"}, {"mooclet", m}});
    auto s = std::make_unique<Slot>();
    s->mooclet = m;
    s->state.reset(m.policy, m);
    s->rng = RandomSource::derived(options_.seed, numeric_suffix(m.id));
    slots_.emplace(m.id, std::move(s));
    slot_order_.push_back(m.id);
  }
  maybe_checkpoint();
  return m;
}

Version Engine::add_version(const std::string& mooclet_id, const std::string& name,
                            std::string content, double weight) {
  Version v;
  {
    std::shared_lock world(world_);
    require_nonnegative_weight(weight);
    Slot& s = slot(mooclet_id);
    std::lock_guard lock(s.mu);
    v.id = "v" + std::to_string(next_version_++);
    v.name = name.empty() ? v.id : name;
    v.content = std::move(content);
    v.weight = weight;
    journal({{"type", "version.add"}, {"mooclet", mooclet_id}, {"version", v}});
    s.mooclet.versions.push_back(v);
    s.state.add_arm(s.mooclet.policy, v.id);
  }
  maybe_checkpoint();
  return v;
}

Version Engine::update_version(const std::string& mooclet_id, const std::string& version_id,
                               std::optional<double> weight, std::optional<bool> archived) {
  Version v;
  {
    std::shared_lock world(world_);
    if (weight) require_nonnegative_weight(*weight);
    Slot& s = slot(mooclet_id);
    std::lock_guard lock(s.mu);
    auto idx = s.mooclet.version_index(version_id);
    if (!idx) fail(ErrorCode::not_found, "version '" + version_id + "' not in mooclet " + mooclet_id);
    v = s.mooclet.versions[*idx];
    if (weight) v.weight = *weight;
    if (archived) v.archived = *archived;
    if (v.archived && s.mooclet.pinned_version == v.id)
      fail(ErrorCode::validation, "cannot archive the pinned version; unpin it first");
    if (v.archived && s.mooclet.policy.kind == PolicyKind::pinned &&
        s.mooclet.policy.version == v.id)
      fail(ErrorCode::validation, "cannot archive the version the pinned policy serves");
    journal({{"type", "version.update"}, {"mooclet", mooclet_id}, {"version", v}});
    s.mooclet.versions[*idx] = v;
  }
  maybe_checkpoint();
  return v;
}

Mooclet Engine::set_policy(const std::string& mooclet_id, PolicySpec policy) {
  Mooclet m;
  {
    std::shared_lock world(world_);
    Slot& s = slot(mooclet_id);
    std::lock_guard lock(s.mu);
    validate_policy(policy, s.mooclet);
    validate_policy_context(policy);
    journal({{"type", "policy.set"}, {"mooclet", mooclet_id}, {"policy", policy}});
    if (policy.context_variable != s.mooclet.policy.context_variable) s.state.buckets.clear();
    s.mooclet.policy = std::move(policy);
    s.state.reset(s.mooclet.policy, s.mooclet);
    m = s.mooclet;
  }
  maybe_checkpoint();
  return m;
}

Mooclet Engine::pin_version(const std::string& mooclet_id, std::optional<std::string> version_id) {
  Mooclet m;
  {
    std::shared_lock world(world_);
    Slot& s = slot(mooclet_id);
    std::lock_guard lock(s.mu);
    if (version_id) {
      const Version* v = s.mooclet.find_version(*version_id);
      if (v == nullptr)
        fail(ErrorCode::validation, "version '" + *version_id + "' does not belong to mooclet " + mooclet_id);
      if (v->archived) fail(ErrorCode::validation, "cannot pin an archived version");
    }
    const Timestamp at = stamper_.next();
    journal({{"type", "pin"},
             {"mooclet", mooclet_id},
             {"version", version_id ? json(*version_id) : json(nullptr)},
             {"at", at}});
    s.mooclet.pinned_version = std::move(version_id);
    s.mooclet.pin_updated_at = at;
    m = s.mooclet;
  }
  maybe_checkpoint();
  return m;
}

Mooclet Engine::get_mooclet(const std::string& mooclet_id) const {
  std::shared_lock world(world_);
  Slot& s = slot(mooclet_id);
  std::lock_guard lock(s.mu);
  return s.mooclet;
}

std::vector<Mooclet> Engine::list_mooclets() const {
  std::shared_lock world(world_);
  std::vector<std::string> ids;
  {
    std::shared_lock lock(slots_mu_);
    ids = slot_order_;
  }
  std::vector<Mooclet> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    Slot& s = slot(id);
    std::lock_guard lock(s.mu);
    out.push_back(s.mooclet);
  }
  return out;
}

// ---------------------------------------------------------------------------
// policy-engine

void Engine::append_assignment_log(const AssignmentRecord& record) {
  // Caller holds log_mu_.
  log_index_[record.id] = log_.size();
  log_.push_back(record);
  auto line = json(record).dump();
  line += '\n';
  log_text_ += line;
  if (log_file_.is_open()) {
    log_file_ << line;
    log_file_.flush();
  }
}

namespace {

void index_assignment(std::map<std::string, std::string>& sticky,
                      std::map<std::pair<std::string, std::string>, std::vector<std::string>>& attempts,
                      const AssignmentRecord& r) {
  if (r.reason == AssignmentReason::policy) sticky[r.learner] = r.version;
  attempts[{r.learner, r.version}].push_back(r.id);
}

}  // namespace

void Engine::apply_assignment(Slot& s, const AssignmentRecord& r) {
  const PolicySpec& spec = s.mooclet.policy;
  s.state.arms.try_emplace(r.version, ArmStats::from_prior(spec)).first->second.assignments++;
  if (spec.kind == PolicyKind::contextual_thompson && r.context.contains(spec.context_variable)) {
    auto& row = s.state.bucket(spec, s.mooclet, bucket_key(r.context[spec.context_variable]));
    row[r.version].assignments++;
  }
  index_assignment(s.sticky, s.attempts, r);
}

Assignment Engine::assign(const std::string& mooclet_id, const std::string& learner,
                          const json& context) {
  if (learner.empty()) fail(ErrorCode::validation, "learner id must be nonempty");
  if (!context.is_object()) fail(ErrorCode::validation, "context must be an object");
  Assignment out;
  {
    std::shared_lock world(world_);
    Slot& s = slot(mooclet_id);
    std::lock_guard lock(s.mu);
    const Mooclet& m = s.mooclet;
    if (!m.has_assignable_version())
      fail(ErrorCode::no_versions, "mooclet " + mooclet_id + " has no assignable versions");

    AssignmentRecord r;
    r.learner = pseudonymizer_->token(learner);
    r.mooclet = m.id;
    r.policy = m.policy.kind;

    std::vector<const Version*> candidates;
    for (const auto& v : m.versions)
      if (v.assignable()) candidates.push_back(&v);

    if (m.pinned_version) {
      r.version = *m.pinned_version;
      r.reason = AssignmentReason::pin;
    } else if (auto it = s.sticky.find(r.learner);
               m.sticky && it != s.sticky.end() && m.find_version(it->second)->assignable()) {
      r.version = it->second;
      r.reason = AssignmentReason::sticky;
    } else {
      r.reason = AssignmentReason::policy;
      std::size_t pick = 0;
      switch (m.policy.kind) {
        case PolicyKind::uniform_random:
          pick = choose_uniform(candidates.size(), s.rng);
          break;
        case PolicyKind::weighted_random: {
          std::vector<double> weights;
          for (const auto* v : candidates) weights.push_back(v->weight);
          pick = choose_weighted(weights, s.rng);
          break;
        }
        case PolicyKind::pinned:
          for (std::size_t i = 0; i < candidates.size(); ++i)
            if (candidates[i]->id == m.policy.version) pick = i;
          break;
        case PolicyKind::thompson_bernoulli: {
          std::vector<BetaPosterior> posteriors;
          for (const auto* v : candidates) posteriors.push_back(s.state.arms.at(v->id).posterior);
          pick = choose_thompson(posteriors, s.rng);
          break;
        }
        case PolicyKind::contextual_thompson: {
          const auto& var = m.policy.context_variable;
          json value = nullptr;
          if (context.contains(var)) {
            value = context[var];
          } else if (auto stored = store_.latest_value(r.learner, var)) {
            value = value_to_json(*stored);
          }
          r.context = {{var, value}};
          const auto key = bucket_key(value);
          s.state.bucket(m.policy, m, key);
          std::vector<std::string> ids;
          for (const auto* v : candidates) ids.push_back(v->id);
          pick = choose_contextual(key, s.state.buckets, ids,
                                   {m.policy.prior_alpha, m.policy.prior_beta}, s.rng);
          break;
        }
      }
      r.version = candidates[pick]->id;
    }

    {
      std::lock_guard log_lock(log_mu_);
      r.timestamp = stamper_.next();
      r.id = "a" + std::to_string(next_assignment_++);
      journal({{"type", "assign"}, {"record", r}});
      append_assignment_log(r);
    }
    apply_assignment(s, r);

    const auto var = version_variable(m.id);
    store_.ensure_system_variable(var, ValueType::text, "version of " + m.id + " served to a learner");
    store_.push_value(r.learner, var, Value{r.version}, Provenance{m.id, r.version, r.id});

    out.version = *m.find_version(r.version);
    out.record = std::move(r);
  }
  maybe_checkpoint();
  return out;
}

void Engine::apply_reward(Slot& s, const std::string& assignment_id, int outcome) {
  AssignmentRecord r;
  {
    std::lock_guard log_lock(log_mu_);
    r = log_.at(log_index_.at(assignment_id));
  }
  const PolicySpec& spec = s.mooclet.policy;
  auto credit = [outcome](ArmStats& arm) {
    if (outcome == 1) {
      ++arm.successes;
      arm.posterior.alpha += 1.0;
    } else {
      ++arm.failures;
      arm.posterior.beta += 1.0;
    }
  };
  credit(s.state.arms.try_emplace(r.version, ArmStats::from_prior(spec)).first->second);
  if (spec.kind == PolicyKind::contextual_thompson && r.context.contains(spec.context_variable)) {
    auto row = s.state.buckets.find(bucket_key(r.context[spec.context_variable]));
    if (row != s.state.buckets.end()) {
      auto arm = row->second.find(r.version);
      if (arm != row->second.end() &&
          arm->second.successes + arm->second.failures < arm->second.assignments)
        credit(arm->second);
    }
  }
  s.rewarded.insert(assignment_id);
}

PolicyState Engine::update_reward(const std::string& mooclet_id, const std::string& version_id,
                                  const std::string& learner, int outcome,
                                  std::optional<std::string> assignment_id) {
  if (outcome != 0 && outcome != 1) fail(ErrorCode::validation, "outcome must be 0 or 1");
  PolicyState state;
  {
    std::shared_lock world(world_);
    Slot& s = slot(mooclet_id);
    std::lock_guard lock(s.mu);
    if (!s.mooclet.find_version(version_id))
      fail(ErrorCode::not_found, "version '" + version_id + "' not in mooclet " + mooclet_id);
    const auto pseudonym = pseudonymizer_->token(learner);
    std::string target;
    if (assignment_id) {
      std::lock_guard log_lock(log_mu_);
      auto it = log_index_.find(*assignment_id);
      if (it == log_index_.end())
        fail(ErrorCode::provenance, "assignment '" + *assignment_id + "' does not exist");
      const auto& r = log_[it->second];
      if (r.mooclet != mooclet_id || r.version != version_id || r.learner != pseudonym)
        fail(ErrorCode::provenance,
             "assignment '" + *assignment_id + "' does not match this learner, mooclet and version");
      if (s.rewarded.contains(*assignment_id))
        fail(ErrorCode::idempotency, "assignment '" + *assignment_id + "' already has a reward");
      target = *assignment_id;
    } else {
      auto it = s.attempts.find({pseudonym, version_id});
      if (it == s.attempts.end())
        fail(ErrorCode::provenance, "learner was never assigned version " + version_id);
      for (auto a = it->second.rbegin(); a != it->second.rend(); ++a)
        if (!s.rewarded.contains(*a)) {
          target = *a;
          break;
        }
      if (target.empty())
        fail(ErrorCode::idempotency, "every assignment of this version to the learner is already rewarded");
    }
    journal({{"type", "reward"}, {"mooclet", mooclet_id}, {"assignment", target}, {"outcome", outcome}});
    apply_reward(s, target, outcome);
    state = s.state;
  }
  maybe_checkpoint();
  return state;
}

PolicyState Engine::policy_state(const std::string& mooclet_id) const {
  std::shared_lock world(world_);
  Slot& s = slot(mooclet_id);
  std::lock_guard lock(s.mu);
  return s.state;
}

MoocletStats Engine::stats(const std::string& mooclet_id) const {
  std::shared_lock world(world_);
  Slot& s = slot(mooclet_id);
  std::lock_guard lock(s.mu);
  MoocletStats out;
  out.mooclet = s.mooclet.id;
  out.policy = s.mooclet.policy.kind;
  out.pinned_version = s.mooclet.pinned_version;
  out.pin_updated_at = s.mooclet.pin_updated_at;
  for (const auto& v : s.mooclet.versions) {
    VersionStats vs;
    vs.id = v.id;
    vs.name = v.name;
    vs.weight = v.weight;
    vs.archived = v.archived;
    vs.pinned = s.mooclet.pinned_version == v.id;
    if (auto it = s.state.arms.find(v.id); it != s.state.arms.end()) {
      vs.assignments = it->second.assignments;
      vs.successes = it->second.successes;
      vs.failures = it->second.failures;
      if (const auto n = vs.successes + vs.failures; n > 0)
        vs.outcome_mean = static_cast<double>(vs.successes) / static_cast<double>(n);
    }
    out.total_assignments += vs.assignments;
    out.versions.push_back(std::move(vs));
  }
  return out;
}

std::vector<AssignmentRecord> Engine::assignment_log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

std::string Engine::assignment_log_text() const {
  std::lock_guard lock(log_mu_);
  return log_text_;
}

// ---------------------------------------------------------------------------
// variable-store entry points

std::string Engine::pseudonym(const std::string& learner) const {
  return pseudonymizer_->token(learner);
}

ValueRecord Engine::push_value(const std::string& learner, const std::string& variable,
                               const Value& value, std::optional<Provenance> provenance) {
  if (learner.empty()) fail(ErrorCode::validation, "learner id must be nonempty");
  ValueRecord out;
  {
    std::shared_lock world(world_);
    const auto token = pseudonymizer_->token(learner);
    if (provenance) {
      std::lock_guard log_lock(log_mu_);
      auto it = log_index_.find(provenance->assignment);
      if (it == log_index_.end() || log_[it->second].mooclet != provenance->mooclet ||
          log_[it->second].version != provenance->version)
        fail(ErrorCode::provenance, "provenance does not name an existing assignment");
    }
    out = store_.push_value(token, variable, value, std::move(provenance));
  }
  maybe_checkpoint();
  return out;
}

// ---------------------------------------------------------------------------
// persistence

json Engine::state() const {
  std::unique_lock world(world_);
  return state_locked(store_.snapshot(), rubric_.snapshot());
}

json Engine::state_locked(json store, json rubric) const {
  json mooclets = json::array();
  for (const auto& id : slot_order_) {
    const Slot& s = *slots_.at(id);
    mooclets.push_back({{"mooclet", s.mooclet}, {"state", s.state}, {"rewarded", s.rewarded}});
  }
  return {{"counters",
           {{"mooclet", next_mooclet_.load()},
            {"version", next_version_.load()},
            {"assignment", next_assignment_.load()}}},
          {"mooclets", mooclets},
          {"assignments", log_},
          {"store", std::move(store)},
          {"rubric", std::move(rubric)}};
}

void Engine::restore(const json& state) {
  const auto& c = state.at("counters");
  next_mooclet_ = c.at("mooclet").get<std::uint64_t>();
  next_version_ = c.at("version").get<std::uint64_t>();
  next_assignment_ = c.at("assignment").get<std::uint64_t>();
  store_.restore(state.at("store"));
  rubric_.restore(state.at("rubric"));
  for (const auto& entry : state.at("mooclets")) {
    auto s = std::make_unique<Slot>();
    s->mooclet = entry.at("mooclet").get<Mooclet>();
    s->state = entry.at("state").get<PolicyState>();
    s->rewarded = entry.at("rewarded").get<std::set<std::string>>();
    s->rng = RandomSource::derived(options_.seed, numeric_suffix(s->mooclet.id));
    stamper_.observe(s->mooclet.pin_updated_at);
    slot_order_.push_back(s->mooclet.id);
    slots_.emplace(s->mooclet.id, std::move(s));
  }
  for (const auto& j : state.at("assignments")) {
    auto r = j.get<AssignmentRecord>();
    stamper_.observe(r.timestamp);
    Slot& s = *slots_.at(r.mooclet);
    index_assignment(s.sticky, s.attempts, r);
    append_assignment_log(r);
  }
}

void Engine::replay(const json& event) {
  const auto type = event.at("type").get<std::string>();
  if (type == "mooclet.create") {
    auto m = event.at("mooclet").get<Mooclet>();
    observe_id(next_mooclet_, m.id);
    auto s = std::make_unique<Slot>();
    s->state.reset(m.policy, m);
    s->rng = RandomSource::derived(options_.seed, numeric_suffix(m.id));
    s->mooclet = std::move(m);
    slot_order_.push_back(s->mooclet.id);
    slots_.emplace(s->mooclet.id, std::move(s));
  } else if (type == "version.add") {
    Slot& s = slot(event.at("mooclet").get<std::string>());
    auto v = event.at("version").get<Version>();
    observe_id(next_version_, v.id);
    s.state.add_arm(s.mooclet.policy, v.id);
    s.mooclet.versions.push_back(std::move(v));
  } else if (type == "version.update") {
    Slot& s = slot(event.at("mooclet").get<std::string>());
    auto v = event.at("version").get<Version>();
    s.mooclet.versions.at(s.mooclet.version_index(v.id).value()) = std::move(v);
  } else if (type == "policy.set") {
    Slot& s = slot(event.at("mooclet").get<std::string>());
    auto policy = event.at("policy").get<PolicySpec>();
    if (policy.context_variable != s.mooclet.policy.context_variable) s.state.buckets.clear();
    s.mooclet.policy = std::move(policy);
    s.state.reset(s.mooclet.policy, s.mooclet);
  } else if (type == "pin") {
    Slot& s = slot(event.at("mooclet").get<std::string>());
    const auto& v = event.at("version");
    s.mooclet.pinned_version = v.is_null() ? std::nullopt : std::optional<std::string>(v.get<std::string>());
    s.mooclet.pin_updated_at = event.at("at").get<Timestamp>();
    stamper_.observe(s.mooclet.pin_updated_at);
  } else if (type == "assign") {
    auto r = event.at("record").get<AssignmentRecord>();
    observe_id(next_assignment_, r.id);
    stamper_.observe(r.timestamp);
    Slot& s = slot(r.mooclet);
    append_assignment_log(r);
    apply_assignment(s, r);
  } else if (type == "reward") {
    Slot& s = slot(event.at("mooclet").get<std::string>());
    apply_reward(s, event.at("assignment").get<std::string>(), event.at("outcome").get<int>());
  } else if (type.starts_with("rubric.")) {
    rubric_.apply(event);
  } else {
    store_.apply(event);
  }
}

}  // namespace mooclet
