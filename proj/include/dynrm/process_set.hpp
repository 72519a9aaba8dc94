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
#include <span>
#include <vector>

#include "dynrm/types.hpp"
#include "dynrm/virtual_cluster.hpp"

namespace dynrm {

struct ProcessMember {
  ProcessId pid;
  JobId job;
  NodeId node;

  friend bool operator==(const ProcessMember&, const ProcessMember&) = default;
};

/// Acknowledgment a spawned process sends once communication is established.
struct Handshake {
  ProcessId pid;
  JobId job;
  NodeId node;
  std::uint32_t generation = 0;  // generation the process joins into
};

/// Simulated MPI process layout, one process per node.
class ProcessSet {
 public:
  const std::vector<ProcessMember>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  std::size_t count_in(JobId job) const;
  bool occupies(NodeId node) const;

  std::uint32_t generation() const noexcept { return generation_; }
  void set_generation(std::uint32_t g) noexcept { generation_ = g; }

  /// Places one process on each node of `job`. Used for the launch layout.
  std::vector<ProcessId> seed(const ClusterState& cluster, JobId job);

  /// Removes every process whose node is listed.
  std::vector<ProcessId> retire_nodes(std::span<const NodeId> nodes);

  const std::vector<Handshake>& handshakes() const noexcept {
    return handshakes_;
  }

 private:
  friend std::vector<ProcessId> spawn_and_handshake(const ClusterState&,
                                                    ProcessSet&, JobId,
                                                    std::size_t);
  ProcessId next_pid() { return ProcessId{next_pid_++}; }

  std::vector<ProcessMember> members_;
  std::vector<Handshake> handshakes_;
  std::uint32_t generation_ = 0;
  std::uint64_t next_pid_ = 0;
};

/// Starts `count` processes on the not-yet-occupied nodes of `job`, lowest
/// node first, and records one handshake per process. Throws
/// DmrError(SpawnFailed) if the job is not running or has fewer free nodes.
std::vector<ProcessId> spawn_and_handshake(const ClusterState& cluster,
                                           ProcessSet& procs, JobId job,
                                           std::size_t count);

}  // namespace dynrm
