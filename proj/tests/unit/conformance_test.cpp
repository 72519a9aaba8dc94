// Copyright 2026 The dynrm-kit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dynrm/conformance.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

namespace dynrm {
namespace {

CapabilityProfile full() { return {"full", true, true, true}; }
CapabilityProfile legacy() { return {"legacy", false, true, true}; }

SuiteOptions small_options() {
  SuiteOptions o;
  o.max_nodes = 16;
  return o;
}

const TestRegistry& registry() {
  static const TestRegistry r = register_builtin_suite(small_options());
  return r;
}

std::set<std::string> passing(const SuiteResult& r) {
  std::set<std::string> out;
  for (const auto& t : r.results) {
    if (t.verdict.kind == Verdict::Kind::Pass) out.insert(t.id);
  }
  return out;
}

TEST(Taxonomy, EighteenLeaves) {
  EXPECT_EQ(taxonomy_leaves().size(), 18u);
  for (const auto& leaf : taxonomy_leaves()) EXPECT_TRUE(is_valid(leaf)) << leaf.str();
  EXPECT_FALSE(is_valid(component(TestCategory::Check, "no-such-leaf")));
  EXPECT_EQ(functional("Policy").str(), "System/Functional/Policy");
  EXPECT_EQ(component(TestCategory::Check, "guard-inhibition").str(),
            "ComponentIntegration/Check/guard-inhibition");
}

TEST(Registry, BuiltinSuiteShape) {
  const auto& r = registry();
  EXPECT_GE(r.size(), 25u);
  const auto& grow = r.at("test_req_grow");
  EXPECT_EQ(grow.path.str(), "ComponentIntegration/Check/request-lifecycle");
  EXPECT_TRUE(grow.requires_caps.batch_submit);
  EXPECT_EQ(r.at("test_check_inhibited").path.subcategory, "guard-inhibition");
  EXPECT_EQ(r.at("test_policy_resize_direction").stage, SuiteStage::Functional);
  EXPECT_EQ(r.at("test_reconf_time").stage, SuiteStage::NonFunctional);
  EXPECT_EQ(r.find("absent"), nullptr);
  EXPECT_THROW(r.at("absent"), RegistryError);
}

TEST(Registry, AddRejectsBadEntries) {
  TestRegistry r;
  TestCase t{"a", component(TestCategory::Check, "no-op"), 2, SuiteStage::Component, {},
             [](TestEnv&) {}};
  r.add(t);
  EXPECT_THROW(r.add(t), RegistryError);
  t.id = "b";
  t.stage = SuiteStage::Functional;
  EXPECT_THROW(r.add(t), RegistryError);
  t.stage = SuiteStage::Component;
  t.path.subcategory = "bogus";
  EXPECT_THROW(r.add(t), RegistryError);
  t.path.subcategory = "no-op";
  t.required_nodes = 0;
  EXPECT_THROW(r.add(t), RegistryError);
}

TEST(RunTest, GrowRequestOnFullAndLegacy) {
  const auto& t = registry().at("test_req_grow");
  EXPECT_EQ(run_test(t, full(), 1).verdict.kind, Verdict::Kind::Pass);
  const auto r = run_test(t, legacy(), 1);
  EXPECT_EQ(r.verdict,
            Verdict::fail("UnsupportedOperation: profile 'legacy' lacks batch_submit"));
}

TEST(RunTest, ForcedFailure) {
  SuiteOptions o = small_options();
  o.forced_failures = {"test_check_should_stay"};
  EXPECT_EQ(run_test(registry().at("test_check_should_stay"), full(), 0, o).verdict,
            Verdict::fail("forced failure"));
}

TEST(RunTest, ThrowingBodyFails) {
  TestCase t{"boom", component(TestCategory::Check, "no-op"), 1, SuiteStage::Component, {},
             [](TestEnv&) { throw TestFailure("expected 1, got 2"); }};
  const auto r = run_test(t, full(), 0);
  EXPECT_EQ(r.verdict.kind, Verdict::Kind::Fail);
  EXPECT_NE(r.verdict.message.find("expected 1, got 2"), std::string::npos);
}

TEST(RunSuite, FullProfilePassesEverything) {
  const auto r = run_suite(registry(), {}, full(), 7, 4, small_options());
  EXPECT_EQ(r.failed(), 0u) << ::testing::PrintToString(r.failed_ids());
  EXPECT_EQ(r.passed(), registry().size());
}

TEST(RunSuite, LegacyComponentFailsExactlyTheBatchTests) {
  SuiteFilter f;
  f.stage = SuiteStage::Component;
  const auto r = run_suite(registry(), f, legacy(), 0, 4, small_options());
  auto ids = r.failed_ids();
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(ids, (std::vector<std::string>{
                     "test_check_pending_job", "test_check_timeout_expander",
                     "test_kill_running_expander", "test_no_modify_running_expander",
                     "test_req_grow", "test_shrink_running_expander"}));
}

TEST(RunSuite, EmptyFilterSelection) {
  SuiteFilter f;
  f.taxonomy_prefix = "System/Nowhere";
  const auto r = run_suite(registry(), f, full(), 0);
  EXPECT_TRUE(r.results.empty());
  EXPECT_EQ(r.passed(), 0u);
}

TEST(RunSuite, PrefixSelectsSubtree) {
  SuiteFilter f;
  f.taxonomy_prefix = "ComponentIntegration/Init";
  const auto r = run_suite(registry(), f, full(), 0);
  EXPECT_EQ(r.results.size(), 9u);
}

std::vector<std::pair<std::string, Verdict>> verdicts(const SuiteResult& r) {
  std::vector<std::pair<std::string, Verdict>> out;
  for (const auto& t : r.results) out.emplace_back(t.id, t.verdict);
  return out;
}

TEST(SuiteProperty, DeterministicForSeed) {
  for (std::uint64_t seed : {0ull, 5ull, 99ull}) {
    const auto a = run_suite(registry(), {}, legacy(), seed, 1, small_options());
    const auto b = run_suite(registry(), {}, legacy(), seed, 4, small_options());
    EXPECT_EQ(verdicts(a), verdicts(b));
    for (std::size_t i = 0; i < a.results.size(); ++i) {
      EXPECT_EQ(a.results[i].cluster_log, b.results[i].cluster_log) << a.results[i].id;
    }
  }
}

TEST(SuiteProperty, IsolatedFromOrderAndNeighbours) {
  const auto whole = run_suite(registry(), {}, full(), 3, 1, small_options());
  for (const auto& t : registry().tests()) {
    const auto alone = run_test(t, full(), 3, small_options());
    const auto it = std::find_if(whole.results.begin(), whole.results.end(),
                                 [&](const TestResult& r) { return r.id == t.id; });
    ASSERT_NE(it, whole.results.end());
    EXPECT_EQ(alone.verdict, it->verdict) << t.id;
    EXPECT_EQ(alone.cluster_log, it->cluster_log) << t.id;
  }
}

TEST(SuiteProperty, CapabilityMonotone) {
  std::vector<CapabilityProfile> profiles;
  for (int mask = 0; mask < 8; ++mask) {
    profiles.push_back({"p" + std::to_string(mask), (mask & 1) != 0, (mask & 2) != 0,
                        (mask & 4) != 0});
  }
  std::vector<std::set<std::string>> pass;
  for (const auto& p : profiles) {
    pass.push_back(passing(run_suite(registry(), {}, p, 11, 4, small_options())));
  }
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      if ((a & b) != a) continue;  // b has every capability a has
      for (const auto& id : pass[a]) EXPECT_TRUE(pass[b].count(id)) << id << " " << a << "->" << b;
    }
  }
}

TEST(Coverage, BuiltinSuiteHasNoGaps) {
  const auto c = coverage_report(registry());
  EXPECT_TRUE(c.complete());
  EXPECT_EQ(c.counts.size(), 18u);
  std::size_t sum = 0;
  for (const auto& [leaf, n] : c.counts) sum += n;
  EXPECT_EQ(sum, registry().size());
}

TEST(Coverage, RemovingPolicyTestOpensGap) {
  const auto c = coverage_report(registry().without("test_policy_resize_direction"));
  ASSERT_EQ(c.gaps.size(), 1u);
  EXPECT_EQ(c.gaps[0], functional("Policy"));
  EXPECT_EQ(c.counts.at(functional("Policy")), 0u);
}

TEST(RequiredCapabilities, MissingNames) {
  RequiredCapabilities r{true, true, false};
  EXPECT_EQ(r.missing_in(legacy()), (std::vector<std::string>{"batch_submit"}));
  EXPECT_TRUE(r.missing_in(full()).empty());
}

}  // namespace
}  // namespace dynrm
