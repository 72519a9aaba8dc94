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

#include "dynrm/state_machine.hpp"

namespace dynrm {

struct PolicyMetrics {
  double useful_time = 0.0;  // seconds
  double total_time = 1.0;   // seconds, > 0

  double efficiency() const;
};

/// Target-efficiency rule with a symmetric dead band: below target - band
/// the execution shrinks by one node, above target + band it expands by one.
/// Throws std::invalid_argument unless 0 < target <= 1 and 0 <= band < target.
Suggestion evaluate_policy(const PolicyMetrics& metrics, double target,
                           double band);

}  // namespace dynrm
