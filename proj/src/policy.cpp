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

#include "dynrm/policy.hpp"

#include <stdexcept>

namespace dynrm {

double PolicyMetrics::efficiency() const {
  if (!(total_time > 0.0) || useful_time < 0.0 || useful_time > total_time) {
    throw std::invalid_argument("policy metrics need 0 <= useful <= total, total > 0");
  }
  return useful_time / total_time;
}

Suggestion evaluate_policy(const PolicyMetrics& metrics, double target,
                           double band) {
  if (!(target > 0.0 && target <= 1.0) || !(band >= 0.0 && band < target)) {
    throw std::invalid_argument("InvalidTarget: need 0 < target <= 1 and 0 <= band < target");
  }
  const double e = metrics.efficiency();
  if (e < target - band) return Suggestion::shrink(1);
  if (e > target + band) return Suggestion::expand(1);
  return Suggestion::stay();
}

}  // namespace dynrm
