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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynrm/types.hpp"

namespace dynrm {

/// Scheduler "version" as seen by the library: which RMS operations exist.
struct CapabilityProfile {
  std::string name = "full";
  bool supports_batch_submit = true;
  bool supports_job_shrink = true;
  bool supports_job_kill = true;

  friend bool operator==(const CapabilityProfile&,
                         const CapabilityProfile&) = default;
};

enum class ClusterErrc {
  InvalidNodeCount,
  UnsupportedOperation,
  UnknownJob,
  InvalidShrinkTarget,
  JobNotRunning,
  InsufficientNodes,
  SnapshotMismatch,
};

std::string_view to_string(ClusterErrc code);

class ClusterError : public std::runtime_error {
 public:
  ClusterError(ClusterErrc code, const std::string& what);
  ClusterErrc code() const noexcept { return code_; }

 private:
  ClusterErrc code_;
};

enum class NodeStatus { Idle, Allocated, Draining };

struct Node {
  NodeId id;
  NodeStatus status = NodeStatus::Idle;
  std::optional<JobId> owner;  // set iff status == Allocated
};

enum class JobStatus { Pending, Running, Terminated };

std::string_view to_string(JobStatus status);

enum class MarkKind { None, Shrink, Kill };

struct JobMark {
  MarkKind kind = MarkKind::None;
  std::size_t shrink_target = 0;

  static JobMark none() { return {}; }
  static JobMark shrink(std::size_t target) { return {MarkKind::Shrink, target}; }
  static JobMark kill() { return {MarkKind::Kill, 0}; }

  friend bool operator==(const JobMark&, const JobMark&) = default;
};

struct Job {
  JobId id;
  std::size_t requested_nodes = 0;
  std::set<NodeId> nodes;
  JobStatus status = JobStatus::Pending;
  JobMark mark;
  SimTime submitted_at{0};
  std::optional<SimTime> granted_at;
  SimDuration grant_latency{0};

  friend bool operator==(const Job&, const Job&) = default;
};

/// One line of the cluster event log: `<time> <event-kind> <job> <nodes>`.
struct ClusterEvent {
  SimTime time{0};
  std::string kind;
  std::optional<JobId> job;
  std::vector<NodeId> nodes;

  friend bool operator==(const ClusterEvent&, const ClusterEvent&) = default;
};

struct GrantEvent {
  JobId job;
  std::vector<NodeId> nodes;
  SimTime time{0};
};

struct GrantLatency {
  SimDuration fixed{0};
  SimDuration max_jitter{0};  // uniform in [0, max_jitter], drawn per submission
};

struct JobStatusView {
  JobStatus status = JobStatus::Pending;
  std::vector<NodeId> nodes;
};

struct JobRemoval {
  JobId job;
  MarkKind mark = MarkKind::None;
  std::vector<NodeId> freed;
};

struct RemovalReport {
  std::vector<JobRemoval> removals;

  std::size_t freed_count() const;
  bool empty() const { return removals.empty(); }
};

/// Allocated node set of a group of jobs at one instant.
struct AllocationSnapshot {
  std::uint64_t cluster_uid = 0;
  std::set<NodeId> nodes;
};

/// Discrete-event model of a batch resource manager.
///
/// Nodes are allocated all-or-nothing in FIFO submission order; grants take
/// the lowest-numbered idle nodes and shrinks release the highest-numbered
/// ones first. Every operation that a profile disables throws
/// ClusterErrc::UnsupportedOperation without touching any state.
class ClusterState {
 public:
  ClusterState(std::size_t node_count, CapabilityProfile profile,
               GrantLatency latency, std::uint64_t seed);

  /// Queues an expander job. Requires batch-submit support.
  JobId submit_job(std::size_t node_count);

  /// Allocates immediately, bypassing the queue. Models the allocation the
  /// application was launched with, which precedes any library call.
  JobId launch_job(std::size_t node_count);

  /// Drops a pending job. No-op on running or terminated jobs.
  void cancel_job(JobId job);

  std::vector<GrantEvent> tick(SimDuration dt);

  JobStatusView job_status(JobId job) const;

  void mark(JobId job, JobMark mark);

  /// Throws exactly what mark() would throw, without recording anything.
  void validate_mark(JobId job, JobMark mark) const;

  RemovalReport remove_marked_resources();

  AllocationSnapshot snapshot(std::span<const JobId> jobs) const;

  SimTime clock() const noexcept { return clock_; }
  std::uint64_t uid() const noexcept { return uid_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t idle_count() const;
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::map<JobId, Job>& jobs() const noexcept { return jobs_; }
  const Job& job(JobId id) const;
  const CapabilityProfile& profile() const noexcept { return profile_; }
  const std::vector<ClusterEvent>& event_log() const noexcept { return log_; }

  /// Full-scan check of the partition and conservation invariants. Returns a
  /// description of the first violation found.
  std::optional<std::string> find_violation() const;

 private:
  Job& job_mut(JobId id);
  void log(std::string kind, std::optional<JobId> job,
           std::vector<NodeId> nodes = {});
  std::vector<NodeId> take_idle(std::size_t count);
  void release(Job& job, const std::vector<NodeId>& nodes);

  std::uint64_t uid_;
  CapabilityProfile profile_;
  GrantLatency latency_;
  std::mt19937_64 rng_;
  SimTime clock_{0};
  std::uint64_t next_job_ = 0;
  std::vector<Node> nodes_;
  std::map<JobId, Job> jobs_;
  std::vector<JobId> queue_;  // pending jobs, submission order
  std::vector<ClusterEvent> log_;
};

ClusterState create_cluster(std::size_t node_count,
                            const CapabilityProfile& profile,
                            GrantLatency latency, std::uint64_t seed);

/// Nodes present in `after` but not in `before`.
std::set<NodeId> detect_new_nodes(const AllocationSnapshot& before,
                                  const AllocationSnapshot& after);

std::string format_event(const ClusterEvent& event);
void export_event_log(std::ostream& os, std::span<const ClusterEvent> log);

}  // namespace dynrm
