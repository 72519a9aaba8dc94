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

#include "dynrm/virtual_cluster.hpp"

#include <algorithm>
#include <atomic>
#include <ostream>
#include <sstream>

namespace dynrm {

namespace {

std::atomic<std::uint64_t> g_next_cluster_uid{1};

std::string join_nodes(std::span<const NodeId> nodes) {
  if (nodes.empty()) return "-";
  std::ostringstream os;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i) os << ',';
    os << nodes[i].value;
  }
  return os.str();
}

}  // namespace

std::string_view to_string(ClusterErrc code) {
  switch (code) {
    case ClusterErrc::InvalidNodeCount: return "InvalidNodeCount";
    case ClusterErrc::UnsupportedOperation: return "UnsupportedOperation";
    case ClusterErrc::UnknownJob: return "UnknownJob";
    case ClusterErrc::InvalidShrinkTarget: return "InvalidShrinkTarget";
    case ClusterErrc::JobNotRunning: return "JobNotRunning";
    case ClusterErrc::InsufficientNodes: return "InsufficientNodes";
    case ClusterErrc::SnapshotMismatch: return "SnapshotMismatch";
  }
  return "Unknown";
}

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::Pending: return "Pending";
    case JobStatus::Running: return "Running";
    case JobStatus::Terminated: return "Terminated";
  }
  return "Unknown";
}

ClusterError::ClusterError(ClusterErrc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code) {}

std::size_t RemovalReport::freed_count() const {
  std::size_t n = 0;
  for (const auto& r : removals) n += r.freed.size();
  return n;
}

ClusterState::ClusterState(std::size_t node_count, CapabilityProfile profile,
                           GrantLatency latency, std::uint64_t seed)
    : uid_(g_next_cluster_uid.fetch_add(1)),
      profile_(std::move(profile)),
      latency_(latency),
      rng_(seed) {
  if (node_count == 0) {
    throw ClusterError(ClusterErrc::InvalidNodeCount,
                       "a cluster needs at least one node");
  }
  nodes_.reserve(node_count);
  for (std::size_t i = 0; i < node_count; ++i) {
    nodes_.push_back(Node{NodeId{i}, NodeStatus::Idle, std::nullopt});
  }
}

ClusterState create_cluster(std::size_t node_count,
                            const CapabilityProfile& profile,
                            GrantLatency latency, std::uint64_t seed) {
  return ClusterState(node_count, profile, latency, seed);
}

std::size_t ClusterState::idle_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(),
                    [](const Node& n) { return n.status == NodeStatus::Idle; }));
}

const Job& ClusterState::job(JobId id) const {
  auto it = jobs_.find(id);
  if (it == jobs_.end()) {
    throw ClusterError(ClusterErrc::UnknownJob,
                       "job " + std::to_string(id.value));
  }
  return it->second;
}

Job& ClusterState::job_mut(JobId id) {
  return const_cast<Job&>(std::as_const(*this).job(id));
}

void ClusterState::log(std::string kind, std::optional<JobId> job,
                       std::vector<NodeId> nodes) {
  log_.push_back(ClusterEvent{clock_, std::move(kind), job, std::move(nodes)});
}

std::vector<NodeId> ClusterState::take_idle(std::size_t count) {
  std::vector<NodeId> taken;
  for (auto& node : nodes_) {
    if (taken.size() == count) break;
    if (node.status == NodeStatus::Idle) taken.push_back(node.id);
  }
  return taken;
}

void ClusterState::release(Job& job, const std::vector<NodeId>& nodes) {
  for (NodeId id : nodes) {
    auto& node = nodes_.at(id.value);
    node.status = NodeStatus::Idle;
    node.owner.reset();
    job.nodes.erase(id);
  }
}

JobId ClusterState::submit_job(std::size_t node_count) {
  if (!profile_.supports_batch_submit) {
    throw ClusterError(ClusterErrc::UnsupportedOperation,
                       "profile '" + profile_.name +
                           "' has no compatible batch-submit API");
  }
  if (node_count == 0) {
    throw ClusterError(ClusterErrc::InvalidNodeCount,
                       "a job must request at least one node");
  }
  Job job;
  job.id = JobId{next_job_++};
  job.requested_nodes = node_count;
  job.submitted_at = clock_;
  job.grant_latency = latency_.fixed;
  if (latency_.max_jitter.count() > 0) {
    std::uniform_int_distribution<SimDuration::rep> jitter(
        0, latency_.max_jitter.count());
    job.grant_latency += SimDuration{jitter(rng_)};
  }
  const JobId id = job.id;
  jobs_.emplace(id, std::move(job));
  queue_.push_back(id);
  log("submit", id);
  return id;
}

JobId ClusterState::launch_job(std::size_t node_count) {
  if (node_count == 0) {
    throw ClusterError(ClusterErrc::InvalidNodeCount,
                       "a job must request at least one node");
  }
  if (idle_count() < node_count) {
    throw ClusterError(ClusterErrc::InsufficientNodes,
                       "requested " + std::to_string(node_count) +
                           " nodes, " + std::to_string(idle_count()) +
                           " idle");
  }
  Job job;
  job.id = JobId{next_job_++};
  job.requested_nodes = node_count;
  job.submitted_at = clock_;
  job.granted_at = clock_;
  job.status = JobStatus::Running;
  auto taken = take_idle(node_count);
  for (NodeId n : taken) {
    nodes_[n.value].status = NodeStatus::Allocated;
    nodes_[n.value].owner = job.id;
    job.nodes.insert(n);
  }
  const JobId id = job.id;
  jobs_.emplace(id, std::move(job));
  log("launch", id, std::move(taken));
  return id;
}

void ClusterState::cancel_job(JobId id) {
  Job& j = job_mut(id);
  if (j.status != JobStatus::Pending) return;
  j.status = JobStatus::Terminated;
  std::erase(queue_, id);
  log("cancel", id);
}

std::vector<GrantEvent> ClusterState::tick(SimDuration dt) {
  std::vector<GrantEvent> grants;
  if (dt.count() <= 0) return grants;
  clock_ += dt;

  // Strict FIFO without backfill: an eligible head that does not fit blocks
  // everything behind it.
  std::vector<JobId> still_pending;
  bool blocked = false;
  for (JobId id : queue_) {
    Job& j = jobs_.at(id);
    const bool eligible = clock_ >= j.submitted_at + j.grant_latency;
    if (blocked || !eligible || idle_count() < j.requested_nodes) {
      if (eligible) blocked = true;
      still_pending.push_back(id);
      continue;
    }
    auto taken = take_idle(j.requested_nodes);
    for (NodeId n : taken) {
      nodes_[n.value].status = NodeStatus::Allocated;
      nodes_[n.value].owner = id;
      j.nodes.insert(n);
    }
    j.status = JobStatus::Running;
    j.granted_at = clock_;
    log("grant", id, taken);
    grants.push_back(GrantEvent{id, std::move(taken), clock_});
  }
  queue_ = std::move(still_pending);
  return grants;
}

JobStatusView ClusterState::job_status(JobId id) const {
  const Job& j = job(id);
  return JobStatusView{j.status, {j.nodes.begin(), j.nodes.end()}};
}

void ClusterState::validate_mark(JobId id, JobMark m) const {
  const Job& j = job(id);
  if (m.kind == MarkKind::Shrink && !profile_.supports_job_shrink) {
    throw ClusterError(ClusterErrc::UnsupportedOperation,
                       "profile '" + profile_.name + "' cannot shrink jobs");
  }
  if (m.kind == MarkKind::Kill && !profile_.supports_job_kill) {
    throw ClusterError(ClusterErrc::UnsupportedOperation,
                       "profile '" + profile_.name + "' cannot kill jobs");
  }
  if (j.status != JobStatus::Running) {
    throw ClusterError(ClusterErrc::JobNotRunning,
                       "job " + std::to_string(id.value) + " is " +
                           std::string(to_string(j.status)));
  }
  if (m.kind == MarkKind::Shrink && m.shrink_target >= j.nodes.size()) {
    throw ClusterError(ClusterErrc::InvalidShrinkTarget,
                       "target " + std::to_string(m.shrink_target) +
                           " is not below current size " +
                           std::to_string(j.nodes.size()));
  }
}

void ClusterState::mark(JobId id, JobMark m) {
  validate_mark(id, m);
  job_mut(id).mark = m;
  log(m.kind == MarkKind::Kill     ? "mark-kill"
      : m.kind == MarkKind::Shrink ? "mark-shrink"
                                   : "mark-clear",
      id);
}

RemovalReport ClusterState::remove_marked_resources() {
  RemovalReport report;
  for (auto& [id, j] : jobs_) {
    if (j.mark.kind == MarkKind::None || j.status != JobStatus::Running) {
      continue;
    }
    std::vector<NodeId> freed;
    if (j.mark.kind == MarkKind::Kill) {
      freed.assign(j.nodes.begin(), j.nodes.end());
      release(j, freed);
      j.status = JobStatus::Terminated;
      log("kill", id, freed);
    } else {
      const std::size_t excess = j.nodes.size() - j.mark.shrink_target;
      // Highest-numbered nodes go first.
      auto it = j.nodes.rbegin();
      for (std::size_t i = 0; i < excess; ++i, ++it) freed.push_back(*it);
      release(j, freed);
      if (j.nodes.empty()) j.status = JobStatus::Terminated;
      log("shrink", id, freed);
    }
    report.removals.push_back(JobRemoval{id, j.mark.kind, std::move(freed)});
    j.mark = JobMark::none();
  }
  return report;
}

AllocationSnapshot ClusterState::snapshot(std::span<const JobId> jobs) const {
  AllocationSnapshot snap{uid_, {}};
  for (JobId id : jobs) {
    const Job& j = job(id);
    snap.nodes.insert(j.nodes.begin(), j.nodes.end());
  }
  return snap;
}

std::optional<std::string> ClusterState::find_violation() const {
  std::size_t allocated = 0;
  for (const auto& node : nodes_) {
    if (node.status != NodeStatus::Allocated) {
      if (node.owner) {
        return "idle node " + std::to_string(node.id.value) + " has an owner";
      }
      continue;
    }
    ++allocated;
    if (!node.owner) {
      return "node " + std::to_string(node.id.value) + " allocated to nobody";
    }
    auto it = jobs_.find(*node.owner);
    if (it == jobs_.end() || it->second.status != JobStatus::Running ||
        !it->second.nodes.contains(node.id)) {
      return "node " + std::to_string(node.id.value) +
             " owner does not hold it";
    }
  }
  std::size_t held = 0;
  for (const auto& [id, j] : jobs_) {
    held += j.nodes.size();
    if (j.status == JobStatus::Running && j.nodes.empty()) {
      return "running job " + std::to_string(id.value) + " holds no nodes";
    }
    if (j.status != JobStatus::Running && !j.nodes.empty()) {
      return "job " + std::to_string(id.value) + " holds nodes while " +
             std::string(to_string(j.status));
    }
    for (NodeId n : j.nodes) {
      if (nodes_.at(n.value).owner != id) {
        return "job " + std::to_string(id.value) + " claims node " +
               std::to_string(n.value) + " it does not own";
      }
    }
  }
  if (held != allocated) return "allocated node count mismatch";
  for (std::size_t i = 1; i < log_.size(); ++i) {
    if (log_[i].time < log_[i - 1].time) return "event log out of order";
  }
  return std::nullopt;
}

std::set<NodeId> detect_new_nodes(const AllocationSnapshot& before,
                                  const AllocationSnapshot& after) {
  if (before.cluster_uid != after.cluster_uid) {
    throw ClusterError(ClusterErrc::SnapshotMismatch,
                       "snapshots come from different clusters");
  }
  std::set<NodeId> added;
  std::set_difference(after.nodes.begin(), after.nodes.end(),
                      before.nodes.begin(), before.nodes.end(),
                      std::inserter(added, added.end()));
  return added;
}

std::string format_event(const ClusterEvent& e) {
  std::ostringstream os;
  os << e.time.count() << ' ' << e.kind << ' ';
  if (e.job) {
    os << e.job->value;
  } else {
    os << '-';
  }
  os << ' ' << join_nodes(e.nodes);
  return os.str();
}

void export_event_log(std::ostream& os, std::span<const ClusterEvent> log) {
  for (const auto& e : log) os << format_event(e) << '\n';
}

}  // namespace dynrm
