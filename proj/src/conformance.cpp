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

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "dynrm/app_harness.hpp"
#include "dynrm/checkpoint.hpp"
#include "dynrm/process_set.hpp"
#include "dynrm/scenario.hpp"
#include "dynrm/state_machine.hpp"

namespace dynrm {

using namespace std::chrono_literals;
using S = MalleabilityState;

// ---------------------------------------------------------------------------
// Taxonomy

std::string_view to_string(TestLevel level) {
  return level == TestLevel::ComponentIntegration ? "ComponentIntegration"
                                                  : "System";
}

std::string_view to_string(TestCategory category) {
  switch (category) {
    case TestCategory::Initialization: return "Initialization";
    case TestCategory::Check: return "Check";
    case TestCategory::Reconfigure: return "Reconfigure";
    case TestCategory::Functional: return "Functional";
    case TestCategory::NonFunctional: return "NonFunctional";
  }
  return "?";
}

std::string TaxonomyPath::str() const {
  return std::string(to_string(level)) + "/" +
         std::string(to_string(category)) + "/" + subcategory;
}

bool TaxonomyPath::starts_with(std::string_view prefix) const {
  return str().starts_with(prefix);
}

TaxonomyPath component(TestCategory category, std::string_view subcategory) {
  return {TestLevel::ComponentIntegration, category, std::string(subcategory)};
}

TaxonomyPath functional(std::string_view kind) {
  return {TestLevel::System, TestCategory::Functional, std::string(kind)};
}

TaxonomyPath non_functional(std::string_view kind) {
  return {TestLevel::System, TestCategory::NonFunctional, std::string(kind)};
}

std::span<const TaxonomyPath> taxonomy_leaves() {
  using C = TestCategory;
  static const std::vector<TaxonomyPath> leaves = {
      component(C::Initialization, "state-validation"),
      component(C::Initialization, "environment-dependency"),
      component(C::Initialization, "configuration-arguments"),
      component(C::Check, "state-validation"),
      component(C::Check, "guard-inhibition"),
      component(C::Check, "no-op"),
      component(C::Check, "constraint-validation"),
      component(C::Check, "request-lifecycle"),
      component(C::Reconfigure, "state-validation"),
      component(C::Reconfigure, "integrity"),
      component(C::Reconfigure, "resource-reallocation"),
      component(C::Reconfigure, "process-layout-reshape"),
      component(C::Reconfigure, "data-redistribution"),
      functional("Manual"),
      functional("Policy"),
      functional("DataRedistribution"),
      non_functional("Scalability"),
      non_functional("TimeConstraint"),
  };
  return leaves;
}

bool is_valid(const TaxonomyPath& path) {
  auto leaves = taxonomy_leaves();
  return std::find(leaves.begin(), leaves.end(), path) != leaves.end();
}

std::string_view to_string(SuiteStage stage) {
  switch (stage) {
    case SuiteStage::Component: return "Component";
    case SuiteStage::Functional: return "Functional";
    case SuiteStage::NonFunctional: return "NonFunctional";
  }
  return "?";
}

std::vector<std::string> RequiredCapabilities::missing_in(
    const CapabilityProfile& profile) const {
  std::vector<std::string> missing;
  if (batch_submit && !profile.supports_batch_submit) missing.push_back("batch_submit");
  if (job_shrink && !profile.supports_job_shrink) missing.push_back("job_shrink");
  if (job_kill && !profile.supports_job_kill) missing.push_back("job_kill");
  return missing;
}

// ---------------------------------------------------------------------------
// Registry

void TestRegistry::add(TestCase test) {
  if (find(test.id)) throw RegistryError("DuplicateId: " + test.id);
  if (!is_valid(test.path)) {
    throw RegistryError("InvalidPath: " + test.id + " tagged " + test.path.str());
  }
  const bool component_level = test.path.level == TestLevel::ComponentIntegration;
  if (component_level != (test.stage == SuiteStage::Component)) {
    throw RegistryError("StageMismatch: " + test.id);
  }
  if (test.required_nodes == 0) {
    throw RegistryError("InvalidNodeCount: " + test.id);
  }
  tests_.push_back(std::move(test));
}

const TestCase* TestRegistry::find(std::string_view id) const {
  auto it = std::find_if(tests_.begin(), tests_.end(),
                         [&](const TestCase& t) { return t.id == id; });
  return it == tests_.end() ? nullptr : &*it;
}

const TestCase& TestRegistry::at(std::string_view id) const {
  if (const TestCase* t = find(id)) return *t;
  throw RegistryError("UnknownTest: " + std::string(id));
}

TestRegistry TestRegistry::without(std::string_view id) const {
  TestRegistry copy = *this;
  std::erase_if(copy.tests_, [&](const TestCase& t) { return t.id == id; });
  return copy;
}

// ---------------------------------------------------------------------------
// Test-body helpers

namespace {

void check(bool condition, const std::string& message) {
  if (!condition) throw TestFailure(message);
}

template <class Fn>
void expect_dmr_error(DmrErrc want, Fn&& fn) {
  try {
    fn();
  } catch (const DmrError& e) {
    check(e.code() == want, "expected " + std::string(to_string(want)) +
                                ", got " + e.what());
    return;
  }
  throw TestFailure("expected " + std::string(to_string(want)) +
                    ", call succeeded");
}

void expect_outcome(const CheckOutcome& got, const CheckOutcome& want) {
  check(got == want, "expected outcome " + to_string(want) + ", got " +
                         to_string(got));
}

void expect_state(const DmrContext& ctx, S want) {
  check(ctx.state == want, "expected state " + std::string(to_string(want)) +
                               ", in " + std::string(to_string(ctx.state)));
}

struct Fixture {
  DmrContext ctx;
  ProcessSet procs;
};

// Launches the application on `nodes` nodes and initializes it.
Fixture launched(ClusterState& cluster, std::size_t nodes,
                 std::size_t min_nodes = 1) {
  const JobId job = cluster.launch_job(nodes);
  Fixture f{DmrContext::make(job, min_nodes, cluster.node_count()), {}};
  f.procs.seed(cluster, job);
  dmr_init(f.ctx, EnvSnapshot::valid(std::to_string(job.value)));
  return f;
}

// Waits in WaitForScheduler for at most `budget` of simulated time.
CheckOutcome poll_scheduler(Fixture& f, ClusterState& cluster,
                            SimDuration budget, SimDuration step = 5ms) {
  CheckOutcome last = CheckOutcome::of(CheckOutcome::Kind::StillPending);
  for (SimDuration waited{0};
       f.ctx.state == S::WaitForScheduler && waited < budget; waited += step) {
    cluster.tick(step);
    last = dmr_check(f.ctx, Suggestion::stay(), cluster);
  }
  return last;
}

// Full grow cycle through an expander job; returns the expander.
JobId grow_cycle(Fixture& f, ClusterState& cluster, std::size_t delta) {
  expect_outcome(dmr_check(f.ctx, Suggestion::expand(delta), cluster),
                 CheckOutcome::of(CheckOutcome::Kind::RequestSubmitted));
  poll_scheduler(f, cluster, 1000ms);
  expect_state(f.ctx, S::WaitForApplication);
  const JobId expander = f.ctx.jobs.back();
  dmr_reconfigure(f.ctx, cluster, f.procs);
  complete_data_phase(f.ctx, DataDirection::Send);
  expect_state(f.ctx, S::NoPendingReconfiguration);
  f.procs.set_generation(f.ctx.reconfig_count);
  return expander;
}

// Positions `f` in WaitForApplication with a granted grow onto a job that
// was allocated outside the batch queue.
JobId stage_granted_grow(Fixture& f, ClusterState& cluster, std::size_t nodes) {
  const JobId extra = cluster.launch_job(nodes);
  f.ctx.jobs.push_back(extra);
  f.ctx.active_request = ResizeRequest{ResizeKind::Grow, nodes, std::nullopt,
                                       extra, cluster.clock()};
  f.ctx.state = S::WaitForApplication;
  return extra;
}

void shrink_cycle(Fixture& f, ClusterState& cluster, std::size_t delta,
                  std::span<const VictimMark> plan = {}) {
  expect_outcome(dmr_check(f.ctx, Suggestion::shrink(delta), cluster),
                 CheckOutcome::of(CheckOutcome::Kind::Granted));
  dmr_reconfigure(f.ctx, cluster, f.procs, plan);
  complete_data_phase(f.ctx, DataDirection::Send);
  expect_state(f.ctx, S::WaitForDataReceive);
  dmr_reconfigure(f.ctx, cluster, f.procs);
  expect_state(f.ctx, S::NoPendingReconfiguration);
  f.procs.set_generation(f.ctx.reconfig_count);
}

void expect_consistent(const ClusterState& cluster, const Fixture& f) {
  if (auto v = verify_invariants(cluster, f.ctx, f.procs)) throw TestFailure(*v);
}

std::size_t scenario_iterations(const Scenario& s) {
  return s.steps.size() * 8 + 4;
}

RunOptions scenario_options(const TestEnv& env, const Scenario& s) {
  RunOptions o;
  o.iterations = scenario_iterations(s);
  o.seed = env.seed;
  o.assert_invariants = true;
  return o;
}

void expect_counts(const ExecutionTrace& trace,
                   const std::vector<std::size_t>& want) {
  const auto got = trace.process_counts();
  auto join = [](const std::vector<std::size_t>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      s += (i ? ", " : "") + std::to_string(v[i]);
    }
    return s + "]";
  };
  check(got == want, "process counts " + join(got) + ", expected " + join(want));
}

void run_scenario_checked(TestEnv& env, const Scenario& scenario) {
  const auto trace = run_app(scenario, env.cluster, scenario_options(env, scenario));
  check(trace.plan_completed, "scenario did not complete");
  std::vector<std::size_t> want;
  for (const auto& step : scenario.steps) want.push_back(total_processes(step));
  expect_counts(trace, want);
  if (auto v = ordered_redistribution(trace)) {
    throw TestFailure("cycle " + std::to_string(v->cycle) + ": " + v->earlier +
                      " not before " + v->later);
  }
}

// Six-line listing of the nonlinear manual resize test.
constexpr std::string_view kNonlinearListing =
    "R0: J0[p0]\n"
    "R1: J0[p0], J1[p1-p2]\n"
    "R2: J0[p0], J1[p1-p2], J2[p3-p6]\n"
    "R3: J0[p0], J1[p1-p2], J2[p3-p6], J3[p7-p9]\n"
    "R4: J0[p0], J1[p1-p2], J2[p3]\n"
    "R5: J0[p0]\n";

// ---------------------------------------------------------------------------
// Component tests: initialization

void add_init_tests(TestRegistry& r) {
  const auto sv = component(TestCategory::Initialization, "state-validation");
  const auto env_dep = component(TestCategory::Initialization, "environment-dependency");
  const auto args = component(TestCategory::Initialization, "configuration-arguments");

  r.add({"test_init_wrong_state", sv, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           for (S s : kAllStates) {
             if (s == S::Uninitialized) continue;
             DmrContext ctx = f.ctx;
             ctx.state = s;
             expect_dmr_error(DmrErrc::WrongState,
                              [&] { dmr_init(ctx, EnvSnapshot::valid()); });
             check(ctx.state == s, "rejected init changed the state");
           }
         }});

  r.add({"test_init_first_run_standby", sv, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           expect_state(f.ctx, S::NoPendingReconfiguration);
           check(f.ctx.reconfig_count == 0, "fresh run has reconfigurations");
         }});

  r.add({"test_init_joiner_waits_for_data", sv, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           const JobId job = env.cluster.launch_job(1);
           DmrContext ctx = DmrContext::make(job, 1, 2);
           ctx.reconfig_count = 2;
           dmr_init(ctx, EnvSnapshot::valid());
           expect_state(ctx, S::WaitForDataReceive);
         }});

  r.add({"test_init_missing_job_id", env_dep, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           DmrContext ctx = DmrContext::make(env.cluster.launch_job(1), 1, 2);
           EnvSnapshot e = EnvSnapshot::valid();
           e.job_id.reset();
           expect_dmr_error(DmrErrc::MissingJobId, [&] { dmr_init(ctx, e); });
           e.job_id = "";
           expect_dmr_error(DmrErrc::MissingJobId, [&] { dmr_init(ctx, e); });
           expect_state(ctx, S::Uninitialized);
         }});

  r.add({"test_init_missing_env_var", env_dep, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           DmrContext ctx = DmrContext::make(env.cluster.launch_job(1), 1, 2);
           for (std::string_view var : kRequiredEnvVars) {
             EnvSnapshot e = EnvSnapshot::valid();
             e.dmr_vars.erase(std::string(var));
             expect_dmr_error(DmrErrc::MissingEnvVar, [&] { dmr_init(ctx, e); });
           }
           expect_state(ctx, S::Uninitialized);
         }});

  r.add({"test_init_dependency_version", env_dep, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           DmrContext ctx = DmrContext::make(env.cluster.launch_job(1), 1, 2);
           EnvSnapshot e = EnvSnapshot::valid();
           for (const char* old : {"0.9", "0.10.4", "garbage"}) {
             e.dmr_vars["DMR_RUNTIME_VERSION"] = old;
             expect_dmr_error(DmrErrc::DependencyTooOld, [&] { dmr_init(ctx, e); });
           }
           e.dmr_vars["DMR_RUNTIME_VERSION"] = std::string(kMinRuntimeVersion);
           dmr_init(ctx, e);
           expect_state(ctx, S::NoPendingReconfiguration);
         }});

  r.add({"test_init_arg_count", args, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           DmrContext ctx = DmrContext::make(env.cluster.launch_job(1), 1, 2);
           EnvSnapshot e = EnvSnapshot::valid();
           for (int bad : {-1, 0}) {
             e.arg_count = bad;
             expect_dmr_error(DmrErrc::BadArgCount, [&] { dmr_init(ctx, e); });
           }
           e.arg_count = 1;
           dmr_init(ctx, e);
           expect_state(ctx, S::NoPendingReconfiguration);
         }});

  r.add({"test_init_null_args", args, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           DmrContext ctx = DmrContext::make(env.cluster.launch_job(1), 1, 2);
           EnvSnapshot e = EnvSnapshot::valid();
           e.args.clear();
           expect_dmr_error(DmrErrc::NullArgs, [&] { dmr_init(ctx, e); });
           e.args = {std::nullopt};
           expect_dmr_error(DmrErrc::NullArgs, [&] { dmr_init(ctx, e); });
         }});

  r.add({"test_init_empty_program_name", args, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           DmrContext ctx = DmrContext::make(env.cluster.launch_job(1), 1, 2);
           EnvSnapshot e = EnvSnapshot::valid();
           e.args = {std::string(), std::string("x")};
           e.arg_count = 2;
           expect_dmr_error(DmrErrc::EmptyProgramName, [&] { dmr_init(ctx, e); });
         }});
}

// ---------------------------------------------------------------------------
// Component tests: check

void add_check_tests(TestRegistry& r) {
  const auto sv = component(TestCategory::Check, "state-validation");
  const auto inhibit = component(TestCategory::Check, "guard-inhibition");
  const auto noop = component(TestCategory::Check, "no-op");
  const auto constraint = component(TestCategory::Check, "constraint-validation");
  const auto lifecycle = component(TestCategory::Check, "request-lifecycle");
  const RequiredCapabilities batch{.batch_submit = true};

  r.add({"test_check_wrong_state", sv, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           for (S s : {S::Uninitialized, S::WaitForDataReceive,
                       S::WaitForApplication, S::WaitForDataSend, S::Finalized}) {
             DmrContext ctx = f.ctx;
             ctx.state = s;
             expect_dmr_error(DmrErrc::WrongState, [&] {
               dmr_check(ctx, Suggestion::expand(1), env.cluster);
             });
           }
         }});

  r.add({"test_check_inhibited", inhibit, 2, SuiteStage::Component,
         {.job_shrink = true},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 2);
           f.ctx.inhibition_remaining = 2;
           for (int i = 0; i < 2; ++i) {
             expect_outcome(dmr_check(f.ctx, Suggestion::shrink(1), env.cluster),
                            CheckOutcome::no_action(NoActionReason::Inhibited));
             expect_state(f.ctx, S::NoPendingReconfiguration);
           }
           check(f.ctx.inhibition_remaining == 0, "inhibition not consumed");
           expect_outcome(dmr_check(f.ctx, Suggestion::shrink(1), env.cluster),
                          CheckOutcome::of(CheckOutcome::Kind::Granted));
           expect_state(f.ctx, S::WaitForApplication);
         }});

  r.add({"test_check_should_stay", noop, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           const auto log_size = env.cluster.event_log().size();
           expect_outcome(dmr_check(f.ctx, Suggestion::stay(), env.cluster),
                          CheckOutcome::no_action(NoActionReason::StaySuggested));
           expect_state(f.ctx, S::NoPendingReconfiguration);
           check(env.cluster.event_log().size() == log_size,
                 "stay suggestion reached the scheduler");
         }});

  r.add({"test_check_bad_shrink_request", constraint, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 2);
           for (std::size_t delta : {0, 2, 5}) {
             expect_outcome(dmr_check(f.ctx, Suggestion::shrink(delta), env.cluster),
                            CheckOutcome::no_action(NoActionReason::BadRequest));
             expect_state(f.ctx, S::NoPendingReconfiguration);
           }
           check(f.ctx.allocation(env.cluster) == 2, "allocation changed");
         }});

  r.add({"test_check_node_limits", constraint, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 2, /*min_nodes=*/2);
           expect_outcome(dmr_check(f.ctx, Suggestion::expand(1), env.cluster),
                          CheckOutcome::no_action(NoActionReason::BadRequest));
           expect_outcome(dmr_check(f.ctx, Suggestion::shrink(1), env.cluster),
                          CheckOutcome::no_action(NoActionReason::BadRequest));
           expect_state(f.ctx, S::NoPendingReconfiguration);
           check(env.cluster.jobs().size() == 1, "an expander was submitted");
         }});

  r.add({"test_req_grow", lifecycle, 2, SuiteStage::Component, batch,
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           expect_outcome(dmr_check(f.ctx, Suggestion::expand(1), env.cluster),
                          CheckOutcome::of(CheckOutcome::Kind::RequestSubmitted));
           expect_state(f.ctx, S::WaitForScheduler);
           check(f.ctx.pending_request && f.ctx.pending_request->scheduler_job,
                 "no pending expander recorded");
           const auto status =
               env.cluster.job_status(*f.ctx.pending_request->scheduler_job);
           check(status.status == JobStatus::Pending, "expander not queued");
         }});

  r.add({"test_req_shrink", lifecycle, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 2);
           const auto log_size = env.cluster.event_log().size();
           expect_outcome(dmr_check(f.ctx, Suggestion::shrink(1), env.cluster),
                          CheckOutcome::of(CheckOutcome::Kind::Granted));
           expect_state(f.ctx, S::WaitForApplication);
           check(env.cluster.event_log().size() == log_size,
                 "shrink request went through the scheduler queue");
         }});

  r.add({"test_check_pending_job", lifecycle, 2, SuiteStage::Component, batch,
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           dmr_check(f.ctx, Suggestion::expand(1), env.cluster);
           expect_outcome(dmr_check(f.ctx, Suggestion::stay(), env.cluster),
                          CheckOutcome::of(CheckOutcome::Kind::StillPending));
           expect_state(f.ctx, S::WaitForScheduler);
           expect_outcome(poll_scheduler(f, env.cluster, 1000ms),
                          CheckOutcome::of(CheckOutcome::Kind::Granted));
           expect_state(f.ctx, S::WaitForApplication);
           check(f.ctx.jobs.size() == 2, "granted expander not tracked");
         }});

  r.add({"test_check_timeout_expander", lifecycle, 2, SuiteStage::Component, batch,
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           env.cluster.launch_job(1);  // occupies the remaining node
           f.ctx.request_timeout = 30ms;
           dmr_check(f.ctx, Suggestion::expand(1), env.cluster);
           const JobId expander = *f.ctx.pending_request->scheduler_job;
           env.cluster.tick(10ms);
           expect_outcome(dmr_check(f.ctx, Suggestion::stay(), env.cluster),
                          CheckOutcome::of(CheckOutcome::Kind::StillPending));
           env.cluster.tick(25ms);
           expect_outcome(dmr_check(f.ctx, Suggestion::stay(), env.cluster),
                          CheckOutcome::of(CheckOutcome::Kind::Expired));
           expect_state(f.ctx, S::NoPendingReconfiguration);
           check(!f.ctx.pending_request, "expired request still pending");
           check(env.cluster.job(expander).status == JobStatus::Terminated,
                 "expired expander left in the queue");
         }});
}

// ---------------------------------------------------------------------------
// Component tests: reconfigure

void add_reconfigure_tests(TestRegistry& r) {
  const auto sv = component(TestCategory::Reconfigure, "state-validation");
  const auto integrity = component(TestCategory::Reconfigure, "integrity");
  const auto realloc = component(TestCategory::Reconfigure, "resource-reallocation");
  const auto reshape = component(TestCategory::Reconfigure, "process-layout-reshape");
  const auto redist = component(TestCategory::Reconfigure, "data-redistribution");

  r.add({"test_reconfigure_wrong_state", sv, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           for (S s : {S::Uninitialized, S::NoPendingReconfiguration,
                       S::WaitForScheduler, S::WaitForDataSend, S::Finalized}) {
             DmrContext ctx = f.ctx;
             ctx.state = s;
             expect_dmr_error(DmrErrc::WrongState, [&] {
               dmr_reconfigure(ctx, env.cluster, f.procs);
             });
           }
         }});

  r.add({"test_finalize_from_every_state", sv, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           for (S s : kAllStates) {
             DmrContext ctx = f.ctx;
             ctx.state = s;
             if (s == S::Uninitialized || s == S::Finalized) {
               expect_dmr_error(DmrErrc::WrongState, [&] { dmr_finalize(ctx); });
               continue;
             }
             const auto report = dmr_finalize(ctx);
             expect_state(ctx, S::Finalized);
             const bool wasted = s == S::WaitForApplication || s == S::WaitForDataSend;
             check(report.wasted_resize == wasted, "wrong wasted-resize flag");
           }
         }});

  r.add({"test_no_modify_running_expander", integrity, 2, SuiteStage::Component,
         {.batch_submit = true},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           const JobId expander = grow_cycle(f, env.cluster, 1);
           const Job before = env.cluster.job(expander);
           // A joiner completing its join removes marked resources only.
           DmrContext joiner = DmrContext::make(expander, 1, 2);
           joiner.reconfig_count = f.ctx.reconfig_count;
           dmr_init(joiner, EnvSnapshot::valid());
           const auto report = dmr_reconfigure(joiner, env.cluster, f.procs);
           expect_state(joiner, S::NoPendingReconfiguration);
           check(report.nodes_removed.empty() && report.jobs_killed.empty(),
                 "unmarked resources were removed");
           check(env.cluster.job(expander) == before, "running expander modified");
           check(f.procs.size() == 2, "processes retired");
         }});

  r.add({"test_remove_marked_job_only", integrity, 2, SuiteStage::Component,
         {.job_kill = true},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           const JobId extra = stage_granted_grow(f, env.cluster, 1);
           dmr_reconfigure(f.ctx, env.cluster, f.procs);
           complete_data_phase(f.ctx, DataDirection::Send);
           const Job launch_before = env.cluster.job(f.ctx.job_handle);
           const VictimMark plan[] = {{extra, JobMark::kill()}};
           shrink_cycle(f, env.cluster, 1, plan);
           check(env.cluster.job(extra).status == JobStatus::Terminated,
                 "marked job not removed");
           check(env.cluster.job(f.ctx.job_handle) == launch_before,
                 "unmarked job modified");
           expect_consistent(env.cluster, f);
         }});

  r.add({"test_kill_running_expander", realloc, 2, SuiteStage::Component,
         {.batch_submit = true, .job_kill = true},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           const JobId expander = grow_cycle(f, env.cluster, 1);
           shrink_cycle(f, env.cluster, 1);
           check(env.cluster.job(expander).status == JobStatus::Terminated,
                 "expander still running");
           check(f.ctx.allocation(env.cluster) == 1, "allocation not reduced");
           check(f.procs.size() == 1, "expander processes not retired");
           check(f.ctx.reconfig_count == 2, "cycles not counted");
           expect_consistent(env.cluster, f);
         }});

  r.add({"test_shrink_running_expander", realloc, 2, SuiteStage::Component,
         {.batch_submit = true, .job_shrink = true},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           const JobId expander = grow_cycle(f, env.cluster, 1);
           const VictimMark plan[] = {{expander, JobMark::shrink(0)}};
           shrink_cycle(f, env.cluster, 1, plan);
           check(env.cluster.job(expander).nodes.empty(),
                 "expander still holds nodes");
           check(env.cluster.idle_count() == 1, "released node not idle");
           expect_consistent(env.cluster, f);
         }});

  r.add({"test_shrink_marked_job", realloc, 2, SuiteStage::Component,
         {.job_shrink = true},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 2);
           shrink_cycle(f, env.cluster, 1);
           const Job& j = env.cluster.job(f.ctx.job_handle);
           check(j.status == JobStatus::Running && j.nodes.size() == 1,
                 "launch job not shrunk to one node");
           check(*j.nodes.begin() == NodeId{0}, "highest node not released first");
           check(f.procs.size() == 1, "process on released node survived");
           expect_consistent(env.cluster, f);
         }});

  r.add({"test_detect_new_nodes", realloc, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           const auto before = env.cluster.snapshot(f.ctx.jobs);
           const JobId extra = env.cluster.launch_job(1);
           f.ctx.jobs.push_back(extra);
           const auto after = env.cluster.snapshot(f.ctx.jobs);
           const auto added = detect_new_nodes(before, after);
           check(added == std::set<NodeId>{NodeId{1}}, "wrong new-node set");
           check(detect_new_nodes(after, after).empty(), "phantom new nodes");
         }});

  r.add({"test_add_new_process_handshake", reshape, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           const JobId extra = stage_granted_grow(f, env.cluster, 1);
           const auto report = dmr_reconfigure(f.ctx, env.cluster, f.procs);
           expect_state(f.ctx, S::WaitForDataSend);
           check(report.processes_spawned.size() == 1, "no process spawned");
           check(f.procs.handshakes().size() == 1 &&
                     f.procs.handshakes()[0].job == extra &&
                     f.procs.handshakes()[0].generation == 1,
                 "handshake missing");
           complete_data_phase(f.ctx, DataDirection::Send);
           expect_state(f.ctx, S::NoPendingReconfiguration);
           check(f.ctx.reconfig_count == 1, "cycle not counted");
           check(f.procs.count_in(extra) == 1, "joiner not in the layout");
         }});

  r.add({"test_add_new_process_checkpoint", redist, 2, SuiteStage::Component, {},
         [](TestEnv& env) {
           Fixture f = launched(env.cluster, 1);
           stage_granted_grow(f, env.cluster, 1);
           dmr_reconfigure(f.ctx, env.cluster, f.procs);
           const auto path = env.scratch / "dmr_ckpt.bin";
           const auto payload =
               CheckpointPayload::make(f.ctx.reconfig_count + 1,
                                       seeded_bytes(4096, env.seed));
           write_checkpoint(path, payload);
           complete_data_phase(f.ctx, DataDirection::Send);
           check(std::filesystem::exists(path), "checkpoint file not written");
           const auto loaded = read_checkpoint(path);
           check(loaded == payload && loaded.generation == 1,
                 "checkpoint content differs");
         }});

  r.add({"test_redistribution_order", redist, 2, SuiteStage::Component,
         {.job_shrink = true},
         [](TestEnv& env) {
           const Scenario s = parse_scenario("R0: J0[p0-p1]\nR1: J0[p0]\n");
           auto trace = run_app(s, env.cluster, scenario_options(env, s));
           check(trace.reconfigurations == 1, "no reconfiguration ran");
           check(!ordered_redistribution(trace), "stages out of order");
           // The check must also notice an inversion.
           auto send = std::find_if(trace.events.begin(), trace.events.end(),
                                    [](const TraceEvent& e) {
                                      return e.kind == kStageDataSend;
                                    });
           auto recv = std::find_if(trace.events.begin(), trace.events.end(),
                                    [](const TraceEvent& e) {
                                      return e.kind == kStageDataReceive;
                                    });
           check(send != trace.events.end() && recv != trace.events.end(),
                 "data stages missing from trace");
           std::iter_swap(send, recv);
           check(ordered_redistribution(trace).has_value(),
                 "inverted data stages not detected");
         }});
}

// ---------------------------------------------------------------------------
// System tests

void add_system_tests(TestRegistry& r, const SuiteOptions& options) {
  const RequiredCapabilities resize{true, true, true};

  r.add({"test_linear_proc_reconfig", functional("Manual"), 4,
         SuiteStage::Functional, resize,
         [](TestEnv& env) { run_scenario_checked(env, linear_scenario(1, 4, 1)); }});

  r.add({"test_nonlinear_proc_reconfig", functional("Manual"), 10,
         SuiteStage::Functional, resize,
         [](TestEnv& env) {
           const Scenario s = parse_scenario(kNonlinearListing);
           const auto deltas = compute_deltas(s);
           check(render(deltas[3]) == "{J0: Unchanged, J1: Unchanged, "
                                      "J2: ShrinkTo(1), J3: Kill}",
                 "unexpected R3->R4 delta " + render(deltas[3]));
           run_scenario_checked(env, s);
         }});

  r.add({"test_policy_resize_direction", functional("Policy"), 4,
         SuiteStage::Functional, resize,
         [](TestEnv& env) {
           RunOptions o;
           o.iterations = 40;
           o.seed = env.seed;
           o.assert_invariants = true;

           PolicyPlan up{0.8, 0.05, 1, [](std::size_t) { return 0.95; }};
           const auto grown = run_app(up, env.cluster, o).process_counts();
           check(std::is_sorted(grown.begin(), grown.end()) && grown.back() == 4,
                 "efficient run did not expand to the node limit");

           ClusterState fresh = create_cluster(4, env.cluster.profile(),
                                               env.options.grant_latency, env.seed);
           PolicyPlan down{0.8, 0.05, 4, [](std::size_t) { return 0.5; }};
           const auto shrunk = run_app(down, fresh, o).process_counts();
           check(std::is_sorted(shrunk.rbegin(), shrunk.rend()) &&
                     shrunk.back() == 1,
                 "inefficient run did not shrink to the minimum");
         }});

  r.add({"test_cr_file_writeread", functional("DataRedistribution"), 2,
         SuiteStage::Functional, {.batch_submit = true},
         [](TestEnv& env) {
           const Scenario s = parse_scenario("R0: J0[p0]\nR1: J0[p0], J1[p1]\n");
           RunOptions o = scenario_options(env, s);
           o.checkpoint_dir = env.scratch;
           o.payload_bytes = std::size_t{1} << 20;
           const auto trace = run_app(s, env.cluster, o);
           check(trace.reconfigurations == 1, "reconfiguration did not happen");

           const auto payload = CheckpointPayload::make(
               1, seeded_bytes(std::size_t{1} << 20, env.seed));
           const auto path = env.scratch / "roundtrip.bin";
           write_checkpoint(path, payload);
           check(read_checkpoint(path) == payload, "checkpoint not bit-identical");
           std::filesystem::resize_file(path, std::filesystem::file_size(path) - 1);
           try {
             read_checkpoint(path);
           } catch (const CheckpointError& e) {
             check(e.code() == CheckpointErrc::ChecksumMismatch,
                   std::string("truncation reported as ") + e.what());
             return;
           }
           throw TestFailure("truncated checkpoint accepted");
         }});

  r.add({"test_reconf_time", non_functional("TimeConstraint"), 2,
         SuiteStage::NonFunctional, {.batch_submit = true},
         [](TestEnv& env) {
           const Scenario s = parse_scenario("R0: J0[p0]\nR1: J0[p0], J1[p1]\n");
           const auto trace = run_app(s, env.cluster, scenario_options(env, s));
           const auto latencies = reconfiguration_latency(trace);
           check(latencies.size() == 1, "expected one reconfiguration");
           const auto budget = std::chrono::milliseconds(env.options.latency_budget_ms);
           for (auto l : latencies) {
             check(l < budget, "reconfiguration took " + std::to_string(l.count()) +
                                   " ns, budget " + std::to_string(budget.count()) +
                                   " ms");
           }
         }});

  r.add({"test_scalability_sweep", non_functional("Scalability"), options.max_nodes,
         SuiteStage::NonFunctional, resize,
         [](TestEnv& env) {
           const Scenario s = linear_scenario(1, env.cluster.node_count(), 1);
           const auto trace = run_app(s, env.cluster, scenario_options(env, s));
           check(trace.plan_completed, "sweep did not complete");
           check(trace.generations.size() == s.steps.size(),
                 "generation count differs from the staircase");
         }});
}

std::filesystem::path make_scratch(std::string_view id) {
  static std::atomic<std::uint64_t> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("dynrm-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter++) + "-" + std::string(id));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TestRegistry register_builtin_suite(const SuiteOptions& options) {
  TestRegistry r;
  add_init_tests(r);
  add_check_tests(r);
  add_reconfigure_tests(r);
  add_system_tests(r, options);
  return r;
}

TestCase scenario_file_test(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const Scenario scenario = parse_scenario(buf.str());
  std::size_t nodes = 1;
  for (const auto& step : scenario.steps) {
    nodes = std::max(nodes, total_processes(step));
  }
  return {"scenario_" + file.stem().string(), functional("Manual"), nodes,
          SuiteStage::Functional, {true, true, true},
          [scenario](TestEnv& env) { run_scenario_checked(env, scenario); }};
}

// ---------------------------------------------------------------------------
// Execution

std::string_view to_string(Verdict::Kind kind) {
  switch (kind) {
    case Verdict::Kind::Pass: return "Pass";
    case Verdict::Kind::Fail: return "Fail";
    case Verdict::Kind::Skip: return "Skip";
  }
  return "?";
}

std::size_t SuiteResult::passed() const {
  return std::count_if(results.begin(), results.end(), [](const TestResult& t) {
    return t.verdict.kind == Verdict::Kind::Pass;
  });
}

std::size_t SuiteResult::failed() const {
  return std::count_if(results.begin(), results.end(), [](const TestResult& t) {
    return t.verdict.kind == Verdict::Kind::Fail;
  });
}

std::size_t SuiteResult::skipped() const {
  return std::count_if(results.begin(), results.end(), [](const TestResult& t) {
    return t.verdict.kind == Verdict::Kind::Skip;
  });
}

std::vector<std::string> SuiteResult::failed_ids() const {
  std::vector<std::string> ids;
  for (const auto& t : results) {
    if (t.verdict.kind == Verdict::Kind::Fail) ids.push_back(t.id);
  }
  return ids;
}

std::chrono::nanoseconds SuiteResult::total_duration() const {
  std::chrono::nanoseconds total{0};
  for (const auto& t : results) total += t.duration;
  return total;
}

bool SuiteFilter::matches(const TestCase& test) const {
  if (stage && test.stage != *stage) return false;
  return taxonomy_prefix.empty() || test.path.starts_with(taxonomy_prefix);
}

TestResult run_test(const TestCase& test, const CapabilityProfile& profile,
                    std::uint64_t seed, const SuiteOptions& options) {
  TestResult result;
  result.id = test.id;
  const auto start = WallClock::now();

  const auto missing = test.requires_caps.missing_in(profile);
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    result.verdict = Verdict::fail("UnsupportedOperation: profile '" +
                                   profile.name + "' lacks " + names);
    return result;
  }
  if (options.forced_failures.count(test.id)) {
    result.verdict = Verdict::fail("forced failure");
    return result;
  }

  ClusterState cluster =
      create_cluster(test.required_nodes, profile, options.grant_latency, seed);
  const auto scratch = make_scratch(test.id);
  TestEnv env{cluster, options, seed, scratch};
  try {
    test.body(env);
    if (auto v = cluster.find_violation()) {
      result.verdict = Verdict::fail("cluster invariant: " + *v);
    }
  } catch (const std::exception& e) {
    result.verdict = Verdict::fail(e.what());
  }
  std::error_code ec;
  std::filesystem::remove_all(scratch, ec);

  std::ostringstream log;
  export_event_log(log, cluster.event_log());
  result.cluster_log = log.str();
  result.duration = WallClock::now() - start;
  return result;
}

SuiteResult run_suite(const TestRegistry& registry, const SuiteFilter& filter,
                      const CapabilityProfile& profile, std::uint64_t seed,
                      std::size_t parallelism, const SuiteOptions& options) {
  std::vector<const TestCase*> selected;
  for (const auto& t : registry.tests()) {
    if (filter.matches(t)) selected.push_back(&t);
  }

  SuiteResult suite;
  suite.profile = profile.name;
  suite.seed = seed;
  suite.results.resize(selected.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < selected.size(); i = next++) {
      suite.results[i] = run_test(*selected[i], profile, seed, options);
    }
  };
  const std::size_t n = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(selected.size(), 1));
  std::vector<std::jthread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return suite;
}

CoverageReport coverage_report(const TestRegistry& registry) {
  CoverageReport report;
  for (const auto& leaf : taxonomy_leaves()) report.counts[leaf] = 0;
  for (const auto& t : registry.tests()) ++report.counts[t.path];
  for (const auto& leaf : taxonomy_leaves()) {
    if (report.counts[leaf] == 0) report.gaps.push_back(leaf);
  }
  return report;
}

}  // namespace dynrm
