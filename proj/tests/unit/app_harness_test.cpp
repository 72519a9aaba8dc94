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

#include "dynrm/app_harness.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "dynrm/process_set.hpp"
#include "staging.hpp"

namespace dynrm {
namespace {

using testing::full_profile;

constexpr const char* kListing =
    "R0: J0[p0]\n"
    "R1: J0[p0], J1[p1-p2]\n"
    "R2: J0[p0], J1[p1-p2], J2[p3-p6]\n"
    "R3: J0[p0], J1[p1-p2], J2[p3-p6], J3[p7-p9]\n"
    "R4: J0[p0], J1[p1-p2], J2[p3]\n"
    "R5: J0[p0]\n";

ClusterState cluster(std::size_t n, std::uint64_t seed = 0) {
  return create_cluster(n, full_profile(), {SimDuration{20}, SimDuration{5}}, seed);
}

RunOptions opts(std::size_t iterations) {
  RunOptions o;
  o.iterations = iterations;
  o.assert_invariants = true;
  return o;
}

TEST(SpawnAndHandshake, TwoProcessesAcknowledged) {
  ClusterState c = cluster(4);
  ProcessSet procs;
  const JobId j0 = c.launch_job(1);
  procs.seed(c, j0);
  const JobId j1 = c.launch_job(2);
  const auto pids = spawn_and_handshake(c, procs, j1, 2);
  EXPECT_EQ(pids.size(), 2u);
  EXPECT_EQ(procs.size(), 3u);
  ASSERT_EQ(procs.handshakes().size(), 2u);
  for (const auto& h : procs.handshakes()) {
    EXPECT_EQ(h.job, j1);
    EXPECT_EQ(h.generation, 1u);
  }
}

TEST(SpawnAndHandshake, PendingJobFails) {
  ClusterState c = cluster(4);
  ProcessSet procs;
  const JobId j = c.submit_job(1);
  try {
    spawn_and_handshake(c, procs, j, 1);
    FAIL();
  } catch (const DmrError& e) {
    EXPECT_EQ(e.code(), DmrErrc::SpawnFailed);
  }
  EXPECT_EQ(procs.size(), 0u);
}

TEST(SpawnAndHandshake, MoreThanFreeNodesFails) {
  ClusterState c = cluster(4);
  ProcessSet procs;
  const JobId j = c.launch_job(2);
  procs.seed(c, j);
  EXPECT_THROW(spawn_and_handshake(c, procs, j, 1), DmrError);
}

TEST(RunApp, NonlinearListing) {
  ClusterState c = cluster(10);
  const auto trace = run_app(parse_scenario(kListing), c, opts(60));
  EXPECT_TRUE(trace.plan_completed);
  EXPECT_EQ(trace.process_counts(), (std::vector<std::size_t>{1, 3, 7, 10, 4, 1}));
  EXPECT_EQ(trace.reconfigurations, 5u);
  EXPECT_EQ(trace.final_state, MalleabilityState::Finalized);
  EXPECT_FALSE(ordered_redistribution(trace));
  // R3->R4 terminates J3 and leaves J2 with one process.
  const auto& r4 = trace.generations[4];
  EXPECT_EQ(r4.procs_per_job.at(trace.scenario_jobs.at(2)), 1u);
  EXPECT_EQ(r4.procs_per_job.count(trace.scenario_jobs.at(3)), 0u);
}

TEST(RunApp, StayOnlyRunEndsFinalizedFromStandby) {
  ClusterState c = cluster(2);
  const auto trace = run_app(parse_scenario("R0: J0[p0]\n"), c, opts(1));
  EXPECT_EQ(trace.reconfigurations, 0u);
  EXPECT_EQ(trace.final_state, MalleabilityState::Finalized);
  EXPECT_FALSE(trace.finalize_wasted);
  ASSERT_FALSE(trace.events.empty());
  EXPECT_EQ(trace.events.back().kind, "state:C>Z");
}

TEST(RunApp, PolicyBelowTargetShrinksFirst) {
  ClusterState c = cluster(4);
  PolicyPlan plan{0.8, 0.05, 4, [](std::size_t) { return 0.5; }};
  RunOptions o = opts(6);
  o.inhibition = 2;
  const auto trace = run_app(plan, c, o);
  ASSERT_GE(trace.outcomes.size(), 3u);
  EXPECT_EQ(trace.outcomes[0], CheckOutcome::no_action(NoActionReason::Inhibited));
  EXPECT_EQ(trace.outcomes[1], CheckOutcome::no_action(NoActionReason::Inhibited));
  EXPECT_EQ(trace.suggestions[2], Suggestion::shrink(1));
  EXPECT_EQ(trace.outcomes[2], CheckOutcome::of(CheckOutcome::Kind::Granted));
}

TEST(RunApp, ScenarioNeedsEnoughNodes) {
  ClusterState c = cluster(5);
  try {
    run_app(parse_scenario(kListing), c, opts(60));
    FAIL();
  } catch (const HarnessError& e) {
    EXPECT_EQ(e.code(), HarnessErrc::PlanInfeasible);
  }
}

TEST(RunApp, MixedStepIsInfeasible) {
  ClusterState c = cluster(4);
  EXPECT_THROW(run_app(parse_scenario("R0: J0[p0-p1]\nR1: J0[p0], J1[p1-p2]\n"), c, opts(20)),
               HarnessError);
}

TEST(RunApp, CheckpointFilesInDirectory) {
  ClusterState c = cluster(3);
  RunOptions o = opts(30);
  o.checkpoint_dir = std::filesystem::temp_directory_path() / "dynrm-harness-ckpt";
  std::filesystem::create_directories(o.checkpoint_dir);
  o.payload_bytes = 1 << 16;
  const auto trace = run_app(parse_scenario("R0: J0[p0]\nR1: J0[p0], J1[p1-p2]\nR2: J0[p0]\n"), c, o);
  EXPECT_TRUE(trace.plan_completed);
  EXPECT_TRUE(std::filesystem::is_empty(o.checkpoint_dir));  // consumed on read
  std::filesystem::remove_all(o.checkpoint_dir);
}

TEST(RunApp, SameSeedSameTrace) {
  auto run = [](std::uint64_t seed) {
    ClusterState c = cluster(10, seed);
    RunOptions o = opts(60);
    o.seed = seed;
    std::ostringstream os;
    export_trace(os, run_app(parse_scenario(kListing), c, o));
    return os.str();
  };
  EXPECT_EQ(run(3), run(3));
}

TEST(OrderedRedistribution, InvertedDataPhases) {
  ClusterState c = cluster(2);
  auto trace = run_app(parse_scenario("R0: J0[p0]\nR1: J0[p0], J1[p1]\n"), c, opts(10));
  ASSERT_FALSE(ordered_redistribution(trace));
  auto find = [&](std::string_view kind) {
    return std::find_if(trace.events.begin(), trace.events.end(),
                        [&](const TraceEvent& e) { return e.kind == kind; });
  };
  std::iter_swap(find(kStageDataSend), find(kStageDataReceive));
  const auto v = ordered_redistribution(trace);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->cycle, 1u);
  EXPECT_EQ(v->earlier, kStageDataSend);
  EXPECT_EQ(v->later, kStageDataReceive);
}

TEST(OrderedRedistribution, ShrinkWithoutSpawn) {
  ClusterState c = cluster(2);
  const auto trace = run_app(parse_scenario("R0: J0[p0-p1]\nR1: J0[p0]\n"), c, opts(5));
  EXPECT_EQ(trace.reconfigurations, 1u);
  EXPECT_EQ(std::count_if(trace.events.begin(), trace.events.end(),
                          [](const TraceEvent& e) { return e.kind == kStageSpawned; }),
            0);
  EXPECT_FALSE(ordered_redistribution(trace));
}

TEST(OrderedRedistribution, MissingStage) {
  ClusterState c = cluster(2);
  auto trace = run_app(parse_scenario("R0: J0[p0]\nR1: J0[p0], J1[p1]\n"), c, opts(10));
  std::erase_if(trace.events, [](const TraceEvent& e) { return e.kind == kStageResume; });
  const auto v = ordered_redistribution(trace);
  ASSERT_TRUE(v);
  EXPECT_EQ(v->later, "(missing)");
}

TEST(ReconfigurationLatency, OnePerCycle) {
  ClusterState c = cluster(4);
  const auto trace = run_app(linear_scenario(1, 3, 1), c, opts(40));
  const auto lat = reconfiguration_latency(trace);
  EXPECT_EQ(lat.size(), 4u);
  for (auto d : lat) {
    EXPECT_GE(d.count(), 0);
    EXPECT_LT(d, std::chrono::milliseconds(100));
  }
  for (const auto& l : trace.latencies) EXPECT_GE(*l.resumed_at, l.resources_secured_at);
}

TEST(ReconfigurationLatency, NoCyclesNoEntries) {
  ClusterState c = cluster(1);
  EXPECT_TRUE(reconfiguration_latency(run_app(parse_scenario("R0: J0[p0]"), c, opts(3))).empty());
}

TEST(ReconfigurationLatency, UnfinishedCycleIsIncomplete) {
  ExecutionTrace trace;
  trace.latencies.push_back(LatencyRecord{});
  try {
    reconfiguration_latency(trace);
    FAIL();
  } catch (const HarnessError& e) {
    EXPECT_EQ(e.code(), HarnessErrc::IncompleteTrace);
  }
}

TEST(VerifyInvariants, DetectsGenerationDrift) {
  auto s = testing::stage(MalleabilityState::NoPendingReconfiguration);
  EXPECT_FALSE(verify_invariants(s->cluster, s->ctx, s->procs));
  s->procs.set_generation(3);
  EXPECT_TRUE(verify_invariants(s->cluster, s->ctx, s->procs));
}

// Every generation of every run satisfies the module invariants, and the
// redistribution ordering holds for every produced trace.
TEST(HarnessProperty, RandomScenariosKeepInvariants) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t max = 2 + seed % 7;
    ClusterState c = cluster(max, seed);
    RunOptions o = opts(200);
    o.seed = seed;
    const auto scenario = linear_scenario(1 + seed % 2, max, 1 + seed % 3);
    const auto trace = run_app(scenario, c, o);
    ASSERT_TRUE(trace.plan_completed) << seed;
    ASSERT_FALSE(ordered_redistribution(trace)) << seed;
    for (std::size_t g = 0; g < trace.generations.size(); ++g) {
      EXPECT_EQ(trace.generations[g].generation, g);
      for (const auto& [job, n] : trace.generations[g].procs_per_job) {
        EXPECT_LE(n, trace.generations[g].nodes_per_job.at(job));
      }
    }
  }
}

}  // namespace
}  // namespace dynrm
