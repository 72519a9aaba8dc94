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

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dynrm/process_set.hpp"
#include "dynrm/scenario.hpp"
#include "dynrm/state_machine.hpp"
#include "dynrm/types.hpp"
#include "dynrm/virtual_cluster.hpp"

namespace dynrm {

/// Automatic resizing driven by a synthetic communication-efficiency model.
struct PolicyPlan {
  double target = 0.8;
  double band = 0.05;
  std::size_t initial_nodes = 1;
  std::function<double(std::size_t processes)> efficiency;
};

using Plan = std::variant<Scenario, PolicyPlan>;

struct RunOptions {
  std::size_t iterations = 1;
  SimDuration iteration_time{10};
  std::size_t min_nodes = 1;
  std::optional<std::size_t> max_nodes;  // defaults to the cluster size
  std::uint32_t inhibition = 0;
  std::uint32_t inhibition_window = 0;
  std::optional<SimDuration> request_timeout;
  std::filesystem::path checkpoint_dir;  // empty: exchange in memory
  std::size_t payload_bytes = 1024;
  std::uint64_t seed = 0;
  bool assert_invariants = false;
};

enum class HarnessErrc {
  PlanInfeasible,
  IncompleteTrace,
  InvariantViolation,
  DataMismatch,
};

class HarnessError : public std::runtime_error {
 public:
  HarnessError(HarnessErrc code, const std::string& what);
  HarnessErrc code() const noexcept { return code_; }

 private:
  HarnessErrc code_;
};

// Stage markers of one reconfiguration, in required order.
inline constexpr std::string_view kStageGranted = "granted";
inline constexpr std::string_view kStageSpawned = "spawned";
inline constexpr std::string_view kStageDataSend = "data-send";
inline constexpr std::string_view kStageDataReceive = "data-receive";
inline constexpr std::string_view kStageResume = "resume";

struct TraceEvent {
  SimTime time{0};
  std::string kind;
  std::optional<JobId> job;
  std::vector<NodeId> nodes;
  std::size_t cycle = 0;  // 1-based reconfiguration index, 0 outside cycles
};

struct GenerationRecord {
  std::uint32_t generation = 0;
  std::size_t processes = 0;
  std::map<JobId, std::size_t> procs_per_job;
  std::map<JobId, std::size_t> nodes_per_job;
};

struct LatencyRecord {
  ResizeKind kind = ResizeKind::Grow;
  SimTime resources_secured_at{0};
  std::optional<SimTime> resumed_at;
  WallClock::time_point wall_resources_secured_at{};
  std::optional<WallClock::time_point> wall_resumed_at;
};

struct ExecutionTrace {
  std::vector<TraceEvent> events;
  std::vector<GenerationRecord> generations;
  std::vector<LatencyRecord> latencies;
  std::vector<Suggestion> suggestions;  // one per dmr_check issued
  std::vector<CheckOutcome> outcomes;
  std::vector<Handshake> handshakes;
  std::map<std::uint32_t, JobId> scenario_jobs;  // Ji -> scheduler job
  MalleabilityState final_state = MalleabilityState::Uninitialized;
  std::size_t reconfigurations = 0;
  bool plan_completed = false;
  bool finalize_wasted = false;

  std::vector<std::size_t> process_counts() const;
};

/// Runs the malleable application loop: dmr_init, then per iteration a cluster
/// tick and a dmr_check at the sync point, a full reconfiguration with data
/// redistribution whenever a resize is granted, and dmr_finalize at the end.
ExecutionTrace run_app(const Plan& plan, ClusterState& cluster,
                       const RunOptions& options);

/// Full-scan consistency check of cluster, context and process layout.
std::optional<std::string> verify_invariants(const ClusterState& cluster,
                                             const DmrContext& ctx,
                                             const ProcessSet& procs);

struct OrderingViolation {
  std::size_t cycle = 0;
  std::string earlier;  // stage that should have come first
  std::string later;    // stage seen before it, or "(missing)"

  friend bool operator==(const OrderingViolation&,
                         const OrderingViolation&) = default;
};

/// Checks granted < spawned < data-send < data-receive < resume for every
/// reconfiguration in the trace. The spawn stage is optional (shrinks).
std::optional<OrderingViolation> ordered_redistribution(
    const ExecutionTrace& trace);

/// Wall-clock time from resources secured to resume, per reconfiguration.
std::vector<std::chrono::nanoseconds> reconfiguration_latency(
    const ExecutionTrace& trace);

/// Same framing as the cluster event log.
void export_trace(std::ostream& os, const ExecutionTrace& trace);

}  // namespace dynrm
