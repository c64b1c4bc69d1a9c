#include "mooclet/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "mooclet/csv.hpp"
#include "mooclet/engine.hpp"
#include "mooclet/errors.hpp"

namespace mooclet::sim {

using nlohmann::json;

namespace {

// 2015-03-14T00:00:00Z; simulations run on a logical clock from here.
constexpr Timestamp kSimEpoch = 1426291200LL * 1'000'000;

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::validation, what + " must lie in [0, 1]");
}

std::string context_variable_of(const SimConfig& c) {
  if (c.policy.kind == PolicyKind::contextual_thompson && !c.policy.context_variable.empty())
    return c.policy.context_variable;
  return c.context_variable;
}

class Model {
 public:
  explicit Model(const SimConfig& c) : c_(c) {}

  double probability(const std::string& bucket, std::size_t arm) const {
    if (c_.model.buckets.empty()) return c_.model.arms[arm].probability;
    return c_.model.bucket_probabilities.at(bucket)[arm];
  }

  std::size_t best_arm(const std::string& bucket) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < c_.model.arms.size(); ++i)
      if (probability(bucket, i) > probability(bucket, best)) best = i;
    return best;
  }

  std::string bucket_of(std::size_t learner_index) const {
    if (c_.model.buckets.empty()) return {};
    return c_.model.buckets[learner_index % c_.model.buckets.size()];
  }

 private:
  const SimConfig& c_;
};

}  // namespace

void validate(const SimConfig& c) {
  if (c.horizon < 1) fail(ErrorCode::validation, "horizon must be at least 1");
  if (c.window < 1) fail(ErrorCode::validation, "window must be at least 1");
  if (c.model.arms.empty()) fail(ErrorCode::validation, "learner model needs at least one arm");
  for (const auto& a : c.model.arms) {
    if (a.name.empty()) fail(ErrorCode::validation, "arm names must be nonempty");
    check_probability(a.probability, "probability of arm " + a.name);
    if (std::count_if(c.model.arms.begin(), c.model.arms.end(),
                      [&](const Arm& b) { return b.name == a.name; }) > 1)
      fail(ErrorCode::validation, "duplicate arm name " + a.name);
  }
  for (const auto& b : c.model.buckets) {
    auto it = c.model.bucket_probabilities.find(b);
    if (it == c.model.bucket_probabilities.end())
      fail(ErrorCode::validation, "bucket '" + b + "' has no probability table");
    if (it->second.size() != c.model.arms.size())
      fail(ErrorCode::validation, "bucket '" + b + "' needs one probability per arm");
    for (double p : it->second) check_probability(p, "probability in bucket " + b);
  }
  if (c.policy.kind == PolicyKind::pinned &&
      std::none_of(c.model.arms.begin(), c.model.arms.end(),
                   [&](const Arm& a) { return a.name == c.policy.version; }))
    fail(ErrorCode::validation, "pinned policy names unknown arm '" + c.policy.version + "'");
}

SimReport run_simulation(const SimConfig& config) {
  validate(config);
  const Model model(config);

  EngineOptions options;
  options.seed = config.seed;
  options.clock = logical_clock(kSimEpoch);
  Engine engine(std::move(options));

  const auto context_var = context_variable_of(config);
  const bool bucketed = !config.model.buckets.empty();
  engine.store().define_variable({config.outcome_variable, VariableKind::outcome, ValueType::number,
                                  "simulated binary outcome", Bounds{0.0, 1.0}});
  if (bucketed || config.policy.kind == PolicyKind::contextual_thompson)
    engine.store().define_variable(
        {context_var, VariableKind::context, ValueType::text, "simulated learner segment", std::nullopt});

  const auto mooclet = engine.create_mooclet("simulation", PolicySpec::uniform(), config.sticky);
  std::map<std::string, std::size_t> arm_of_version;
  std::vector<std::string> version_of_arm;
  for (std::size_t i = 0; i < config.model.arms.size(); ++i) {
    const auto& arm = config.model.arms[i];
    const auto v = engine.add_version(mooclet.id, arm.name, json{{"arm", arm.name}}.dump());
    arm_of_version[v.id] = i;
    version_of_arm.push_back(v.id);
  }
  PolicySpec policy = config.policy;
  if (policy.kind == PolicyKind::pinned) {
    for (std::size_t i = 0; i < config.model.arms.size(); ++i)
      if (config.model.arms[i].name == policy.version) policy.version = version_of_arm[i];
  }
  if (policy.kind == PolicyKind::contextual_thompson) policy.context_variable = context_var;
  engine.set_policy(mooclet.id, policy);

  RandomSource outcomes = RandomSource::derived(config.seed, 0x5151);
  std::vector<bool> seen(config.model.population ? config.model.population : 0, false);
  for (std::size_t t = 0; t < config.horizon; ++t) {
    const std::size_t idx = config.model.population ? t % config.model.population : t;
    const std::string learner = "learner-" + std::to_string(idx);
    const std::string bucket = model.bucket_of(idx);
    const bool first_visit = config.model.population == 0 || !seen[idx];
    if (config.model.population) seen[idx] = true;
    if (bucketed && first_visit) engine.push_value(learner, context_var, Value{bucket});

    const auto a = engine.assign(mooclet.id, learner);
    const auto arm = arm_of_version.at(a.version.id);
    const int outcome = outcomes.bernoulli(model.probability(bucket, arm)) ? 1 : 0;
    engine.push_value(learner, config.outcome_variable, Value{static_cast<double>(outcome)},
                      Provenance{mooclet.id, a.version.id, a.record.id});
    engine.update_reward(mooclet.id, a.version.id, learner, outcome, a.record.id);
  }

  // Compile the report from the engine's own records.
  SimReport report;
  report.config = config;
  report.assignment_log = engine.assignment_log_text();

  std::map<std::string, int> outcome_of;
  {
    ValueFilter f;
    f.variable = config.outcome_variable;
    for (const auto& r : engine.store().query_values(f, Role::admin))
      if (r.provenance) outcome_of[r.provenance->assignment] = static_cast<int>(std::get<double>(r.value));
  }

  const std::size_t n_arms = config.model.arms.size();
  std::vector<std::uint64_t> counts(n_arms, 0);
  std::vector<std::uint64_t> successes(n_arms, 0);
  std::vector<bool> hit_best;
  std::map<std::string, std::vector<bool>> bucket_hits;
  std::map<std::string, double> bucket_regret;
  double regret = 0.0;
  std::size_t t = 0;
  for (const auto& r : engine.assignment_log()) {
    if (r.mooclet != mooclet.id) continue;
    std::string bucket;
    if (bucketed) {
      auto v = engine.store().latest_value(r.learner, context_var);
      if (v) bucket = std::get<std::string>(*v);
    }
    const auto arm = arm_of_version.at(r.version);
    const auto best = model.best_arm(bucket);
    const double gap = model.probability(bucket, best) - model.probability(bucket, arm);
    regret += gap;
    const int outcome = outcome_of.at(r.id);
    ++counts[arm];
    successes[arm] += static_cast<std::uint64_t>(outcome);
    hit_best.push_back(arm == best);
    bucket_hits[bucket].push_back(arm == best);
    bucket_regret[bucket] += gap;
    report.regret.push_back(regret);
    report.trace.push_back({t, r.learner, bucket, config.model.arms[arm].name, r.version, outcome, regret});
    ++t;

    if (t % config.window == 0 || t == config.horizon) {
      WindowShare w;
      w.end = t;
      w.start = t - ((t % config.window) ? t % config.window : config.window);
      w.best_arm_share = static_cast<double>(std::count(hit_best.begin() + static_cast<std::ptrdiff_t>(w.start),
                                                        hit_best.end(), true)) /
                         static_cast<double>(w.end - w.start);
      for (std::size_t i = 0; i < n_arms; ++i) w.counts[config.model.arms[i].name] = counts[i];
      report.windows.push_back(std::move(w));
    }
  }
  if (t != config.horizon)
    fail(ErrorCode::internal, "assignment log does not reconcile with the simulation horizon");

  for (std::size_t i = 0; i < n_arms; ++i) {
    ArmSummary s;
    s.arm = config.model.arms[i].name;
    s.version = version_of_arm[i];
    s.assignments = counts[i];
    if (counts[i]) s.outcome_mean = static_cast<double>(successes[i]) / static_cast<double>(counts[i]);
    if (bucketed) {
      double sum = 0.0;
      for (const auto& b : config.model.buckets) sum += model.probability(b, i);
      s.true_mean = sum / static_cast<double>(config.model.buckets.size());
    } else {
      s.true_mean = config.model.arms[i].probability;
    }
    report.arms.push_back(std::move(s));
  }

  const std::size_t tail = std::min(config.window, hit_best.size());
  report.final_window_best_arm_share =
      static_cast<double>(std::count(hit_best.end() - static_cast<std::ptrdiff_t>(tail), hit_best.end(), true)) /
      static_cast<double>(tail);
  report.cumulative_regret = regret;

  if (bucketed) {
    for (const auto& b : config.model.buckets) {
      BucketSummary s;
      s.bucket = b;
      const auto& hits = bucket_hits[b];
      s.assignments = hits.size();
      s.best_arm = config.model.arms[model.best_arm(b)].name;
      if (!hits.empty()) {
        const std::size_t quarter = (hits.size() + 3) / 4;
        s.best_arm_share_final_quarter =
            static_cast<double>(std::count(hits.end() - static_cast<std::ptrdiff_t>(quarter), hits.end(), true)) /
            static_cast<double>(quarter);
      }
      s.regret = bucket_regret[b];
      report.buckets.push_back(std::move(s));
    }
  }
  return report;
}

Comparison compare_policies(const SimConfig& base, const std::vector<PolicyRun>& runs) {
  if (runs.empty()) fail(ErrorCode::validation, "no policies to compare");
  const auto& seeds = runs.front().seeds;
  if (seeds.empty()) fail(ErrorCode::validation, "comparison needs at least one seed");
  for (const auto& r : runs)
    if (r.seeds != seeds)
      fail(ErrorCode::validation, "policy '" + r.label + "' uses a different seed list; comparisons are paired");

  Comparison out;
  out.seeds = seeds;
  for (const auto& run : runs) {
    PolicyComparison row;
    row.label = run.label;
    for (auto seed : seeds) {
      SimConfig c = base;
      c.policy = run.policy;
      c.seed = seed;
      const auto report = run_simulation(c);
      row.regrets.push_back(report.cumulative_regret);
      row.final_window_shares.push_back(report.final_window_best_arm_share);
    }
    const auto n = static_cast<double>(seeds.size());
    for (double r : row.regrets) row.mean_regret += r / n;
    for (double s : row.final_window_shares) row.mean_final_window_share += s / n;
    out.rows.push_back(std::move(row));
  }
  return out;
}

SimConfig config_from_json(const json& j) {
  try {
    SimConfig c;
    for (const auto& a : j.at("arms"))
      c.model.arms.push_back({a.at("name").get<std::string>(), a.value("p", 0.5)});
    if (j.contains("buckets")) {
      for (const auto& b : j["buckets"]) {
        const auto name = b.at("name").get<std::string>();
        c.model.buckets.push_back(name);
        c.model.bucket_probabilities[name] = b.at("p").get<std::vector<double>>();
      }
    }
    c.model.population = j.value("population", std::size_t{0});
    if (j.contains("policy")) c.policy = j["policy"].get<PolicySpec>();
    c.horizon = j.value("horizon", std::size_t{1000});
    c.seed = j.value("seed", std::uint64_t{0});
    c.window = j.value("window", std::size_t{500});
    c.sticky = j.value("sticky", false);
    c.context_variable = j.value("context_variable", std::string("segment"));
    c.outcome_variable = j.value("outcome_variable", std::string("outcome"));
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, std::string("simulation config: ") + e.what());
  }
}

std::vector<PolicyRun> runs_from_json(const json& j) {
  try {
    std::vector<std::uint64_t> shared;
    if (j.contains("seeds")) shared = j["seeds"].get<std::vector<std::uint64_t>>();
    std::vector<PolicyRun> runs;
    for (const auto& p : j.at("policies")) {
      PolicyRun r;
      r.policy = p.at("policy").get<PolicySpec>();
      r.label = p.value("label", std::string(to_string(r.policy.kind)));
      r.seeds = p.contains("seeds") ? p["seeds"].get<std::vector<std::uint64_t>>() : shared;
      runs.push_back(std::move(r));
    }
    return runs;
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, std::string("comparison config: ") + e.what());
  }
}

json to_json(const SimConfig& c) {
  json arms = json::array();
  for (const auto& a : c.model.arms) arms.push_back({{"name", a.name}, {"p", a.probability}});
  json buckets = json::array();
  for (const auto& b : c.model.buckets)
    buckets.push_back({{"name", b}, {"p", c.model.bucket_probabilities.at(b)}});
  return {{"arms", arms},
          {"buckets", buckets},
          {"population", c.model.population},
          {"policy", c.policy},
          {"horizon", c.horizon},
          {"seed", c.seed},
          {"window", c.window},
          {"sticky", c.sticky},
          {"context_variable", c.context_variable},
          {"outcome_variable", c.outcome_variable}};
}

json to_json(const SimReport& r) {
  json arms = json::array();
  for (const auto& a : r.arms)
    arms.push_back({{"arm", a.arm},
                    {"version", a.version},
                    {"assignments", a.assignments},
                    {"outcome_mean", a.outcome_mean ? json(*a.outcome_mean) : json(nullptr)},
                    {"true_mean", a.true_mean}});
  json windows = json::array();
  for (const auto& w : r.windows)
    windows.push_back({{"start", w.start}, {"end", w.end}, {"best_arm_share", w.best_arm_share}, {"counts", w.counts}});
  json buckets = json::array();
  for (const auto& b : r.buckets)
    buckets.push_back({{"bucket", b.bucket},
                       {"assignments", b.assignments},
                       {"best_arm", b.best_arm},
                       {"best_arm_share_final_quarter", b.best_arm_share_final_quarter},
                       {"regret", b.regret}});
  return {{"config", to_json(r.config)},
          {"seed", r.config.seed},
          {"arms", arms},
          {"windows", windows},
          {"buckets", buckets},
          {"cumulative_regret", r.cumulative_regret},
          {"final_window_best_arm_share", r.final_window_best_arm_share},
          {"regret", r.regret}};
}

json to_json(const Comparison& c) {
  json rows = json::array();
  for (const auto& r : c.rows)
    rows.push_back({{"label", r.label},
                    {"mean_regret", r.mean_regret},
                    {"mean_final_window_best_arm_share", r.mean_final_window_share},
                    {"regrets", r.regrets},
                    {"final_window_best_arm_shares", r.final_window_shares}});
  return {{"seeds", c.seeds}, {"policies", rows}};
}

std::string trace_csv(const SimReport& report) {
  std::string out = csv::format_row({"step", "learner", "bucket", "arm", "version", "outcome", "cumulative_regret"});
  char buf[32];
  for (const auto& s : report.trace) {
    std::snprintf(buf, sizeof buf, "%.6f", s.cumulative_regret);
    out += csv::format_row({std::to_string(s.step), s.learner, s.bucket, s.arm, s.version,
                            std::to_string(s.outcome), buf});
  }
  return out;
}

}  // namespace mooclet::sim
