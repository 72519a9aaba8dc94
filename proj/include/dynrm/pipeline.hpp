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
#include <iosfwd>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dynrm/conformance.hpp"
#include "dynrm/virtual_cluster.hpp"

namespace dynrm {

enum class PipelineErrc { ConfigError, UnknownProfile, IoError };

class PipelineError : public std::runtime_error {
 public:
  PipelineError(PipelineErrc code, const std::string& what);
  PipelineErrc code() const noexcept { return code_; }

 private:
  PipelineErrc code_;
};

// ---------------------------------------------------------------------------
// Profile registry
//
// INI file, one section per profile:
//
//   [full23]
//   batch_submit = true
//   job_shrink = true
//   job_kill = true
//   build_compatible = true
//
// Missing keys default to true.

struct ProfileEntry {
  CapabilityProfile profile;
  bool build_compatible = true;
};

class ProfileRegistry {
 public:
  static ProfileRegistry builtin();  // legacy17, full23, broken25
  static ProfileRegistry parse(std::string_view ini_text);
  static ProfileRegistry load(const std::filesystem::path& path);

  void add(ProfileEntry entry);  // ConfigError on a duplicate name
  const ProfileEntry& at(std::string_view name) const;  // UnknownProfile
  const std::vector<ProfileEntry>& entries() const noexcept { return entries_; }

 private:
  std::vector<ProfileEntry> entries_;
};

// ---------------------------------------------------------------------------
// Pipeline

enum class PipelineStage { BuildCheck, Component, Functional, NonFunctional };

inline constexpr PipelineStage kAllStages[] = {
    PipelineStage::BuildCheck, PipelineStage::Component,
    PipelineStage::Functional, PipelineStage::NonFunctional};

std::string_view to_string(PipelineStage stage);

/// Accepts canonical names and the short forms build, component, functional,
/// nonfunctional (case-insensitive, '-' and '_' ignored).
PipelineStage parse_stage(std::string_view name);

enum class StageStatus { Passed, Failed, NotRun };

std::string_view to_string(StageStatus status);

enum class ReportFormat { Text, Structured };

struct PipelineConfig {
  std::vector<std::string> profiles = {"full23"};
  std::vector<PipelineStage> stages = {std::begin(kAllStages), std::end(kAllStages)};
  std::uint64_t seed = 0;
  std::uint64_t latency_budget_ms = 5000;
  std::size_t max_nodes = 64;
  std::filesystem::path report_path;  // empty: no report file
  std::filesystem::path scenario_dir;  // empty: no scenario files
  ReportFormat format = ReportFormat::Text;
  std::size_t parallelism = 1;
  std::set<std::string> forced_failures;

  /// ConfigError unless stages are non-empty, canonical and unique, and the
  /// numeric fields are positive.
  void validate() const;
};

struct StageResult {
  PipelineStage stage = PipelineStage::BuildCheck;
  StageStatus status = StageStatus::NotRun;
  std::chrono::nanoseconds duration{0};
  SuiteResult suite;
};

struct ProfileRow {
  std::string profile;
  std::vector<StageResult> stages;  // the selected stages, canonical order

  StageStatus status() const;  // Failed if any stage failed
  std::chrono::nanoseconds duration() const;
  /// Summary "Time/Reason" cell: "<n> tests not passed",
  /// "Compilation error" or "<seconds> seconds".
  std::string reason() const;
};

struct PipelineResult {
  std::uint64_t seed = 0;
  std::vector<ProfileRow> rows;  // one per profile, config order

  bool all_passed() const;
};

/// Runs every configured profile through the staged pipeline.
PipelineResult run_pipeline(const PipelineConfig& config,
                            const ProfileRegistry& profiles);

/// Same as run_pipeline, but requires at least two profiles.
PipelineResult run_matrix(const PipelineConfig& config,
                          const ProfileRegistry& profiles);

/// 0 when everything passed, 1 otherwise.
int exit_code(const PipelineResult& result);

std::string render_text(const PipelineResult& result);
nlohmann::json to_json(const PipelineResult& result);
nlohmann::json to_json(const SuiteResult& suite);

/// Throws PipelineError(IoError) if the file cannot be written.
void emit_report(const PipelineResult& result, const std::filesystem::path& path,
                 ReportFormat format);

}  // namespace dynrm
