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

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynrm/process_set.hpp"
#include "dynrm/types.hpp"
#include "dynrm/virtual_cluster.hpp"

namespace dynrm {

// Letters A..F follow the state diagram of the DMR core API.
enum class MalleabilityState : std::uint8_t {
  Uninitialized,             // A
  WaitForDataReceive,        // B
  NoPendingReconfiguration,  // C
  WaitForScheduler,          // D
  WaitForApplication,        // E
  WaitForDataSend,           // F
  Finalized,
};

inline constexpr std::array<MalleabilityState, 7> kAllStates = {
    MalleabilityState::Uninitialized,
    MalleabilityState::WaitForDataReceive,
    MalleabilityState::NoPendingReconfiguration,
    MalleabilityState::WaitForScheduler,
    MalleabilityState::WaitForApplication,
    MalleabilityState::WaitForDataSend,
    MalleabilityState::Finalized,
};

std::string_view to_string(MalleabilityState state);
std::string_view state_letter(MalleabilityState state);

enum class DmrEvent : std::uint8_t {
  Init,
  Check,
  Reconfigure,
  CompleteDataPhase,
  Finalize,
};

inline constexpr std::array<DmrEvent, 5> kAllEvents = {
    DmrEvent::Init, DmrEvent::Check, DmrEvent::Reconfigure,
    DmrEvent::CompleteDataPhase, DmrEvent::Finalize,
};

std::string_view event_name(DmrEvent event);

enum class DmrErrc {
  WrongState,
  MissingJobId,
  MissingEnvVar,
  DependencyTooOld,
  BadArgCount,
  NullArgs,
  EmptyProgramName,
  SpawnFailed,
  RemovalFailed,
  SchedulerError,
};

std::string_view to_string(DmrErrc code);

class DmrError : public std::runtime_error {
 public:
  DmrError(DmrErrc code, const std::string& what);
  DmrErrc code() const noexcept { return code_; }

 private:
  DmrErrc code_;
};

/// DMR-specific variables every launch must carry.
inline constexpr std::array<std::string_view, 2> kRequiredEnvVars = {
    "DMR_RUNTIME_VERSION", "DMR_CHECK_PERIOD"};
inline constexpr std::string_view kMinRuntimeVersion = "1.0";

/// What dmr_init sees of the process environment. `arg_count` and `args`
/// mirror argc/argv: an empty `args` stands for a NULL array and a nullopt
/// element for a NULL pointer.
struct EnvSnapshot {
  std::optional<std::string> job_id;
  std::map<std::string, std::string> dmr_vars;
  int arg_count = 0;
  std::vector<std::optional<std::string>> args;

  /// A launch environment that passes every init precondition.
  static EnvSnapshot valid(std::string job_id = "1",
                           std::string program = "app");
};

enum class ResizeKind { Grow, Shrink };

struct ResizeRequest {
  ResizeKind kind = ResizeKind::Grow;
  std::size_t delta_nodes = 1;
  std::optional<SimDuration> timeout;
  std::optional<JobId> scheduler_job;  // only ever set for Grow
  SimTime submitted_at{0};
};

struct Suggestion {
  enum class Kind { ShouldExpand, ShouldShrink, ShouldStay };

  Kind kind = Kind::ShouldStay;
  std::size_t delta_nodes = 0;

  static Suggestion stay() { return {}; }
  static Suggestion expand(std::size_t n) { return {Kind::ShouldExpand, n}; }
  static Suggestion shrink(std::size_t n) { return {Kind::ShouldShrink, n}; }

  friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

std::string to_string(const Suggestion& s);

enum class NoActionReason { Inhibited, StaySuggested, BadRequest };

struct CheckOutcome {
  enum class Kind { NoAction, RequestSubmitted, StillPending, Expired, Granted };

  Kind kind = Kind::NoAction;
  NoActionReason reason = NoActionReason::StaySuggested;  // NoAction only

  static CheckOutcome no_action(NoActionReason r) { return {Kind::NoAction, r}; }
  static CheckOutcome of(Kind k) { return {k, NoActionReason::StaySuggested}; }

  friend bool operator==(const CheckOutcome& a, const CheckOutcome& b) {
    return a.kind == b.kind &&
           (a.kind != Kind::NoAction || a.reason == b.reason);
  }
};

std::string to_string(const CheckOutcome& outcome);

struct TransitionRecord {
  DmrEvent event;
  MalleabilityState from;
  MalleabilityState to;

  friend bool operator==(const TransitionRecord&,
                         const TransitionRecord&) = default;
};

struct DmrContext {
  MalleabilityState state = MalleabilityState::Uninitialized;
  std::uint32_t reconfig_count = 0;
  std::uint32_t inhibition_remaining = 0;
  std::uint32_t inhibition_window = 0;  // re-armed after each reconfiguration
  std::size_t min_nodes = 1;
  std::size_t max_nodes = 1;
  std::optional<SimDuration> request_timeout;

  std::optional<ResizeRequest> pending_request;  // present iff WaitForScheduler
  std::optional<ResizeRequest> active_request;   // the cycle being executed
  JobId job_handle;
  std::vector<JobId> jobs;  // launch job first, then expanders in grant order
  EnvSnapshot env;
  std::vector<TransitionRecord> history;

  static DmrContext make(JobId launch_job, std::size_t min_nodes,
                         std::size_t max_nodes);

  /// Nodes currently held by this context's running jobs.
  std::size_t allocation(const ClusterState& cluster) const;

  /// True while a shrink awaits slurm_remove_resources.
  bool removal_pending() const;
};

/// Explicit victim choice for a shrink.
struct VictimMark {
  JobId job;
  JobMark mark;
};

struct ReconfigureReport {
  std::vector<NodeId> nodes_added;
  std::vector<NodeId> nodes_removed;
  std::vector<JobId> jobs_killed;
  std::vector<JobId> jobs_shrunk;
  std::vector<ProcessId> processes_spawned;
  std::vector<ProcessId> processes_retired;
  std::vector<VictimMark> marks_placed;
};

struct FinalizeReport {
  MalleabilityState prior = MalleabilityState::Uninitialized;
  bool wasted_resize = false;  // terminated right after paying for a resize
};

enum class DataDirection { Send, Receive };

void dmr_init(DmrContext& ctx, const EnvSnapshot& env);

CheckOutcome dmr_check(DmrContext& ctx, const Suggestion& suggestion,
                       ClusterState& cluster);

/// With an empty `plan`, shrink victims are chosen newest job first.
ReconfigureReport dmr_reconfigure(DmrContext& ctx, ClusterState& cluster,
                                  ProcessSet& procs,
                                  std::span<const VictimMark> plan = {});

void complete_data_phase(DmrContext& ctx, DataDirection direction);

FinalizeReport dmr_finalize(DmrContext& ctx);

std::vector<DmrEvent> allowed_events(MalleabilityState state);

/// Newest-job-first shrink selection over `ctx.jobs`.
std::vector<VictimMark> select_shrink_victims(const DmrContext& ctx,
                                              const ClusterState& cluster,
                                              std::size_t delta_nodes);

struct TransitionRule {
  MalleabilityState from;
  DmrEvent event;
  MalleabilityState to;
  std::string_view guard;
};

std::span<const TransitionRule> transition_table();

/// Adjacency listing, one `from --event [guard]--> to` line per rule.
void export_transition_table(std::ostream& os);

}  // namespace dynrm
