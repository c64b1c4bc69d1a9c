#include <gtest/gtest.h>

#include <numeric>

#include "mooclet/errors.hpp"
#include "mooclet/simulator.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace mooclet;
using namespace mooclet::sim;
using testing_support::code_of;

namespace {

SimConfig two_arms(PolicySpec policy, std::size_t horizon, std::uint64_t seed) {
  SimConfig c;
  c.model.arms = {{"good", 0.7}, {"bad", 0.3}};
  c.policy = std::move(policy);
  c.horizon = horizon;
  c.seed = seed;
  return c;
}

SimConfig reversed_buckets(std::size_t per_bucket, std::uint64_t seed) {
  SimConfig c;
  c.model.arms = {{"A", 0.5}, {"B", 0.5}};
  c.model.buckets = {"morning", "evening"};
  c.model.bucket_probabilities = {{"morning", {0.7, 0.3}}, {"evening", {0.3, 0.7}}};
  c.policy = PolicySpec::contextual("segment");
  c.horizon = 2 * per_bucket;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Simulator, SameSeedGivesIdenticalReportAndLog) {
  const auto c = two_arms(PolicySpec::thompson(), 600, 12);
  const auto a = run_simulation(c);
  const auto b = run_simulation(c);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a.assignment_log, b.assignment_log);
  EXPECT_EQ(trace_csv(a), trace_csv(b));
  EXPECT_NE(a.assignment_log, run_simulation(two_arms(PolicySpec::thompson(), 600, 13)).assignment_log);
}

TEST(Simulator, ReportReconcilesWithLog) {
  const auto r = run_simulation(two_arms(PolicySpec::uniform(), 1200, 3));
  std::size_t lines = std::count(r.assignment_log.begin(), r.assignment_log.end(), '\n');
  EXPECT_EQ(lines, 1200u);
  EXPECT_EQ(r.regret.size(), 1200u);
  EXPECT_EQ(r.trace.size(), 1200u);
  ASSERT_EQ(r.windows.size(), 3u);  // 500, 500, 200
  EXPECT_EQ(r.windows.back().start, 1000u);
  EXPECT_EQ(r.windows.back().end, 1200u);
  EXPECT_EQ(r.windows.back().counts.at("good") + r.windows.back().counts.at("bad"), 1200u);
  EXPECT_EQ(r.arms[0].assignments + r.arms[1].assignments, 1200u);
  EXPECT_DOUBLE_EQ(r.cumulative_regret, r.regret.back());
  for (std::size_t i = 1; i < r.regret.size(); ++i) ASSERT_GE(r.regret[i], r.regret[i - 1]);
}

TEST(Simulator, PinnedRegretIsExact) {
  auto best = two_arms(PolicySpec::pinned_to("good"), 400, 1);
  EXPECT_DOUBLE_EQ(run_simulation(best).cumulative_regret, 0.0);
  EXPECT_DOUBLE_EQ(run_simulation(best).final_window_best_arm_share, 1.0);
  auto worst = two_arms(PolicySpec::pinned_to("bad"), 400, 1);
  EXPECT_NEAR(run_simulation(worst).cumulative_regret, 0.4 * 400, 1e-9);
}

TEST(Simulator, UniformRegretMatchesExpectation) {
  // Regret of uniform is 0.4 * (#bad pulls); #bad ~ Binomial(h, 1/2).
  const int h = 4000;
  const double expected = oracle::uniform_expected_regret({0.7, 0.3}, h);
  const double sd = 0.4 * std::sqrt(h * 0.25);
  const auto r = run_simulation(two_arms(PolicySpec::uniform(), h, 99));
  EXPECT_NEAR(r.cumulative_regret, expected, 4 * sd);
}

TEST(Simulator, ObservedOutcomeMeansTrackTruth) {
  const auto r = run_simulation(two_arms(PolicySpec::uniform(), 6000, 5));
  for (const auto& a : r.arms) {
    ASSERT_TRUE(a.outcome_mean);
    const double se = std::sqrt(a.true_mean * (1 - a.true_mean) / static_cast<double>(a.assignments));
    EXPECT_NEAR(*a.outcome_mean, a.true_mean, 4 * se) << a.arm;
  }
}

TEST(Simulator, ThompsonAgreesWithReferenceSampler) {
  const int seeds = 10;
  const double reference = oracle::reference_thompson_best_share({0.7, 0.3}, 2000, seeds, 500);
  double ours = 0;
  for (int s = 0; s < seeds; ++s)
    ours += run_simulation(two_arms(PolicySpec::thompson(), 2000, 500 + s)).final_window_best_arm_share / seeds;
  EXPECT_GE(reference, 0.8);
  EXPECT_GE(ours, 0.8);
  EXPECT_NEAR(ours, reference, 0.1);
}

TEST(Simulator, ContextualLearnsEachBucket) {
  const auto r = run_simulation(reversed_buckets(1000, 8));
  ASSERT_EQ(r.buckets.size(), 2u);
  EXPECT_EQ(r.buckets[0].best_arm, "A");
  EXPECT_EQ(r.buckets[1].best_arm, "B");
  for (const auto& b : r.buckets) {
    EXPECT_EQ(b.assignments, 1000u);
    EXPECT_GE(b.best_arm_share_final_quarter, 0.75) << b.bucket;
  }
  EXPECT_NEAR(r.buckets[0].regret + r.buckets[1].regret, r.cumulative_regret, 1e-9);
}

TEST(Simulator, NonContextualPolicyCannotPersonalize) {
  // Both arms have population mean 0.5, so a single posterior cannot beat
  // roughly half per bucket.
  auto c = reversed_buckets(1000, 8);
  c.policy = PolicySpec::thompson();
  const auto r = run_simulation(c);
  EXPECT_LT(r.buckets[0].best_arm_share_final_quarter + r.buckets[1].best_arm_share_final_quarter, 1.3);
}

TEST(Simulator, StickyPopulationKeepsVersions) {
  auto c = two_arms(PolicySpec::uniform(), 300, 4);
  c.model.population = 10;
  c.sticky = true;
  const auto r = run_simulation(c);
  std::map<std::string, std::string> seen;
  for (const auto& s : r.trace) {
    auto [it, fresh] = seen.emplace(s.learner, s.version);
    EXPECT_EQ(it->second, s.version);
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(Simulator, ValidationErrors) {
  auto c = two_arms(PolicySpec::uniform(), 0, 1);
  EXPECT_EQ(code_of([&] { run_simulation(c); }), ErrorCode::validation);
  c = two_arms(PolicySpec::uniform(), 10, 1);
  c.model.arms[0].probability = 1.5;
  EXPECT_EQ(code_of([&] { run_simulation(c); }), ErrorCode::validation);
  c = two_arms(PolicySpec::pinned_to("nope"), 10, 1);
  EXPECT_EQ(code_of([&] { run_simulation(c); }), ErrorCode::validation);
  c = reversed_buckets(10, 1);
  c.model.bucket_probabilities["morning"] = {0.5};
  EXPECT_EQ(code_of([&] { run_simulation(c); }), ErrorCode::validation);
  c = two_arms(PolicySpec::uniform(), 10, 1);
  c.model.arms.push_back({"good", 0.1});
  EXPECT_EQ(code_of([&] { run_simulation(c); }), ErrorCode::validation);
}

TEST(Simulator, ComparisonRequiresPairedSeeds) {
  const auto base = two_arms(PolicySpec::uniform(), 200, 0);
  EXPECT_EQ(code_of([&] {
              compare_policies(base, {{"u", PolicySpec::uniform(), {1, 2}}, {"t", PolicySpec::thompson(), {1, 3}}});
            }),
            ErrorCode::validation);
  EXPECT_EQ(code_of([&] { compare_policies(base, {}); }), ErrorCode::validation);
  const auto cmp =
      compare_policies(base, {{"u", PolicySpec::uniform(), {1, 2, 3}}, {"t", PolicySpec::thompson(), {1, 2, 3}}});
  ASSERT_EQ(cmp.rows.size(), 2u);
  EXPECT_EQ(cmp.rows[0].regrets.size(), 3u);
  auto single = base;
  single.seed = 2;
  EXPECT_DOUBLE_EQ(cmp.rows[0].regrets[1], run_simulation(single).cumulative_regret);
  EXPECT_NEAR(cmp.rows[1].mean_regret,
              std::accumulate(cmp.rows[1].regrets.begin(), cmp.rows[1].regrets.end(), 0.0) / 3, 1e-12);
}

TEST(Simulator, JsonConfigRoundTrip) {
  const auto j = nlohmann::json::parse(R"({
    "arms": [{"name": "A", "p": 0.6}, {"name": "B", "p": 0.4}],
    "buckets": [{"name": "x", "p": [0.6, 0.4]}, {"name": "y", "p": [0.2, 0.9]}],
    "population": 50,
    "policy": {"kind": "contextual_thompson", "parameters": {"context_variable": "segment"}},
    "horizon": 300, "seed": 9, "window": 100, "sticky": true
  })");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.model.arms.size(), 2u);
  EXPECT_EQ(c.model.bucket_probabilities.at("y")[1], 0.9);
  EXPECT_EQ(c.policy.kind, PolicyKind::contextual_thompson);
  EXPECT_EQ(c.window, 100u);
  const auto again = config_from_json(to_json(c));
  EXPECT_EQ(to_json(again), to_json(c));
  EXPECT_EQ(code_of([] { config_from_json(nlohmann::json::object()); }), ErrorCode::validation);

  const auto runs = runs_from_json(nlohmann::json::parse(
      R"({"seeds": [1, 2], "policies": [{"label": "u", "policy": {"kind": "uniform_random"}},
                                        {"policy": {"kind": "thompson_bernoulli"}}]})"));
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[1].label, "thompson_bernoulli");
  EXPECT_EQ(runs[1].seeds, (std::vector<std::uint64_t>{1, 2}));
}

TEST(Simulator, TraceCsvHeader) {
  const auto r = run_simulation(two_arms(PolicySpec::uniform(), 3, 1));
  const auto text = trace_csv(r);
  EXPECT_TRUE(text.starts_with("step,learner,bucket,arm,version,outcome,cumulative_regret\r\n"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}
