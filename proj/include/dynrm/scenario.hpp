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
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dynrm {

// Resize patterns written as one line per configuration:
//
//   R0: J0[p0]
//   R1: J0[p0], J1[p1-p2]
//
// `Rk` is the configuration index, `Ji` a scheduler job and `[pa-pb]` the
// closed range of process ids that job hosts (one process per node).

struct ProcRange {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;

  std::size_t size() const noexcept { return hi - lo + 1; }
  bool overlaps(const ProcRange& o) const noexcept {
    return lo <= o.hi && o.lo <= hi;
  }
  friend bool operator==(const ProcRange&, const ProcRange&) = default;
};

struct JobLayout {
  std::uint32_t job = 0;
  ProcRange procs;

  friend bool operator==(const JobLayout&, const JobLayout&) = default;
};

struct Step {
  std::uint32_t index = 0;
  std::vector<JobLayout> layouts;

  const JobLayout* find(std::uint32_t job) const;
  friend bool operator==(const Step&, const Step&) = default;
};

struct Scenario {
  std::vector<Step> steps;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, std::string reason);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string reason_;
};

Scenario parse_scenario(std::string_view text);

/// Canonical text: `R<k>: J<i>[p<a>-p<b>], ...`, one step per line.
std::string render(const Step& step);
std::string render(const Scenario& scenario);

struct JobAction {
  enum class Kind { NewJob, Grow, ShrinkTo, Kill, Unchanged };

  Kind kind = Kind::Unchanged;
  std::size_t count = 0;  // NewJob/ShrinkTo: process count; Grow: increment

  static JobAction new_job(std::size_t n) { return {Kind::NewJob, n}; }
  static JobAction shrink_to(std::size_t n) { return {Kind::ShrinkTo, n}; }
  static JobAction kill() { return {Kind::Kill, 0}; }
  static JobAction unchanged() { return {Kind::Unchanged, 0}; }

  friend bool operator==(const JobAction&, const JobAction&) = default;
};

std::string to_string(const JobAction& action);

using Delta = std::map<std::uint32_t, JobAction>;

class ScenarioError : public std::runtime_error {
 public:
  enum class Code { UnsupportedGrowth, InvalidRange };

  ScenarioError(Code code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

std::vector<Delta> compute_deltas(const Scenario& scenario);

std::string render(const Delta& delta);

std::size_t total_processes(const Step& step);

/// Up-then-down staircase min -> max -> min. Each expansion is a new job of
/// `step` processes (the last one possibly smaller to land on `max`); each
/// contraction kills the newest job.
Scenario linear_scenario(std::size_t min, std::size_t max, std::size_t step);

}  // namespace dynrm
