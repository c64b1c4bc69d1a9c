#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mooclet/registry.hpp"

namespace mooclet::sim {

struct Arm {
  std::string name;
  double probability = 0.5;  // true Bernoulli outcome rate
};

// Synthetic learner population. Learner i (0-based) belongs to bucket
// buckets[i % buckets.size()]; learners are visited round-robin.
struct LearnerModel {
  std::vector<Arm> arms;
  std::vector<std::string> buckets;
  // bucket -> per-arm outcome probability (same order as `arms`)
  std::map<std::string, std::vector<double>> bucket_probabilities;
  std::size_t population = 0;  // 0 means one fresh learner per step
};

struct SimConfig {
  LearnerModel model;
  // pinned policies name an arm in `version`; it is resolved to the
  // engine's version id.
  PolicySpec policy;
  std::size_t horizon = 1000;
  std::uint64_t seed = 0;
  std::size_t window = 500;
  bool sticky = false;
  std::string context_variable = "segment";
  std::string outcome_variable = "outcome";
};

struct ArmSummary {
  std::string arm;
  std::string version;
  std::uint64_t assignments = 0;
  std::optional<double> outcome_mean;
  double true_mean = 0.0;  // population average over buckets
};

struct WindowShare {
  std::size_t start = 0;  // step range [start, end)
  std::size_t end = 0;
  double best_arm_share = 0.0;
  std::map<std::string, std::uint64_t> counts;  // cumulative at `end`, by arm
};

struct BucketSummary {
  std::string bucket;
  std::uint64_t assignments = 0;
  std::string best_arm;
  double best_arm_share_final_quarter = 0.0;
  double regret = 0.0;
};

struct StepTrace {
  std::size_t step = 0;
  std::string learner;  // pseudonym
  std::string bucket;
  std::string arm;
  std::string version;
  int outcome = 0;
  double cumulative_regret = 0.0;
};

struct SimReport {
  SimConfig config;
  std::vector<ArmSummary> arms;
  std::vector<WindowShare> windows;
  std::vector<BucketSummary> buckets;
  std::vector<double> regret;  // cumulative expected regret after each step
  std::vector<StepTrace> trace;
  double final_window_best_arm_share = 0.0;
  double cumulative_regret = 0.0;
  std::string assignment_log;  // the engine's log, for reconciliation
};

// Runs one simulation against a fresh in-memory engine, driving the public
// assignment, value-push and reward paths. The report is compiled from the
// engine's assignment log and variable store.
SimReport run_simulation(const SimConfig& config);

struct PolicyRun {
  std::string label;
  PolicySpec policy;
  std::vector<std::uint64_t> seeds;
};

struct PolicyComparison {
  std::string label;
  double mean_regret = 0.0;
  double mean_final_window_share = 0.0;
  std::vector<double> regrets;  // per seed, same order as the seed list
  std::vector<double> final_window_shares;
};

struct Comparison {
  std::vector<std::uint64_t> seeds;
  std::vector<PolicyComparison> rows;
};

// Paired-seed comparison: every run must carry the same seed list.
Comparison compare_policies(const SimConfig& base, const std::vector<PolicyRun>& runs);

void validate(const SimConfig& config);

// JSON config files. A compare file adds "policies": [{label, policy, seeds?}]
// and an optional shared "seeds" list.
SimConfig config_from_json(const nlohmann::json& j);
std::vector<PolicyRun> runs_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimConfig& config);
nlohmann::json to_json(const SimReport& report);
nlohmann::json to_json(const Comparison& comparison);
// step,learner,bucket,arm,version,outcome,cumulative_regret
std::string trace_csv(const SimReport& report);

}  // namespace mooclet::sim
