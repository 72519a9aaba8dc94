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

#include "dynrm/process_set.hpp"

#include <algorithm>

#include "dynrm/state_machine.hpp"

namespace dynrm {

std::size_t ProcessSet::count_in(JobId job) const {
  return static_cast<std::size_t>(std::count_if(
      members_.begin(), members_.end(),
      [&](const ProcessMember& m) { return m.job == job; }));
}

bool ProcessSet::occupies(NodeId node) const {
  return std::any_of(members_.begin(), members_.end(),
                     [&](const ProcessMember& m) { return m.node == node; });
}

std::vector<ProcessId> ProcessSet::seed(const ClusterState& cluster, JobId job) {
  std::vector<ProcessId> pids;
  for (NodeId node : cluster.job(job).nodes) {
    if (occupies(node)) continue;
    const ProcessId pid = next_pid();
    members_.push_back({pid, job, node});
    pids.push_back(pid);
  }
  return pids;
}

std::vector<ProcessId> ProcessSet::retire_nodes(std::span<const NodeId> nodes) {
  std::vector<ProcessId> retired;
  std::erase_if(members_, [&](const ProcessMember& m) {
    const bool hit = std::find(nodes.begin(), nodes.end(), m.node) != nodes.end();
    if (hit) retired.push_back(m.pid);
    return hit;
  });
  return retired;
}

std::vector<ProcessId> spawn_and_handshake(const ClusterState& cluster,
                                           ProcessSet& procs, JobId job,
                                           std::size_t count) {
  const Job* j = nullptr;
  try {
    j = &cluster.job(job);
  } catch (const ClusterError& e) {
    throw DmrError(DmrErrc::SpawnFailed, e.what());
  }
  if (j->status != JobStatus::Running) {
    throw DmrError(DmrErrc::SpawnFailed,
                   "job " + std::to_string(job.value) + " is " +
                       std::string(to_string(j->status)));
  }
  std::vector<NodeId> free_nodes;
  for (NodeId node : j->nodes) {
    if (!procs.occupies(node)) free_nodes.push_back(node);
  }
  if (count == 0 || free_nodes.size() < count) {
    throw DmrError(DmrErrc::SpawnFailed,
                   "cannot place " + std::to_string(count) + " processes on " +
                       std::to_string(free_nodes.size()) + " free nodes");
  }
  std::vector<ProcessId> pids;
  for (std::size_t i = 0; i < count; ++i) {
    const ProcessId pid = procs.next_pid();
    procs.members_.push_back({pid, job, free_nodes[i]});
    procs.handshakes_.push_back(
        {pid, job, free_nodes[i], procs.generation_ + 1});
    pids.push_back(pid);
  }
  return pids;
}

}  // namespace dynrm
