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
#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace dynrm {

// Simulated time is kept in integral milliseconds since cluster creation.
using SimDuration = std::chrono::milliseconds;
using SimTime = std::chrono::milliseconds;

using WallClock = std::chrono::steady_clock;

template <typename Tag>
struct StrongId {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(const StrongId&, const StrongId&) = default;
  friend std::ostream& operator<<(std::ostream& os, StrongId id) {
    return os << id.value;
  }
};

using NodeId = StrongId<struct NodeIdTag>;
using JobId = StrongId<struct JobIdTag>;
using ProcessId = StrongId<struct ProcessIdTag>;

}  // namespace dynrm

template <typename Tag>
struct std::hash<dynrm::StrongId<Tag>> {
  std::size_t operator()(dynrm::StrongId<Tag> id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
