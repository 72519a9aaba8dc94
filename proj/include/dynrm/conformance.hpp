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
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynrm/virtual_cluster.hpp"

namespace dynrm {

// ---------------------------------------------------------------------------
// Taxonomy

enum class TestLevel { ComponentIntegration, System };

enum class TestCategory {
  Initialization,
  Check,
  Reconfigure,
  Functional,
  NonFunctional,
};

std::string_view to_string(TestLevel level);
std::string_view to_string(TestCategory category);

struct TaxonomyPath {
  TestLevel level = TestLevel::ComponentIntegration;
  TestCategory category = TestCategory::Initialization;
  std::string subcategory;

  /// "ComponentIntegration/Check/guard-inhibition", "System/Functional/Policy".
  std::string str() const;
  bool starts_with(std::string_view prefix) const;

  friend auto operator<=>(const TaxonomyPath&, const TaxonomyPath&) = default;
};

/// Every leaf of the closed taxonomy vocabulary, in canonical order.
std::span<const TaxonomyPath> taxonomy_leaves();

bool is_valid(const TaxonomyPath& path);

TaxonomyPath component(TestCategory category, std::string_view subcategory);
TaxonomyPath functional(std::string_view kind);      // Manual|Policy|DataRedistribution
TaxonomyPath non_functional(std::string_view kind);  // Scalability|TimeConstraint

// ---------------------------------------------------------------------------
// Test cases

enum class SuiteStage { Component, Functional, NonFunctional };

std::string_view to_string(SuiteStage stage);

struct RequiredCapabilities {
  bool batch_submit = false;
  bool job_shrink = false;
  bool job_kill = false;

  /// Names of the capabilities `profile` lacks.
  std::vector<std::string> missing_in(const CapabilityProfile& profile) const;
};

struct SuiteOptions {
  std::uint64_t latency_budget_ms = 5000;
  std::size_t max_nodes = 64;
  GrantLatency grant_latency{SimDuration{20}, SimDuration{5}};
  std::set<std::string> forced_failures;  // test ids forced to Fail
};

/// What a test body gets: a fresh cluster of `required_nodes` it owns.
struct TestEnv {
  ClusterState& cluster;
  const SuiteOptions& options;
  std::uint64_t seed;
  std::filesystem::path scratch;  // test-private directory, already created
};

struct TestCase {
  std::string id;
  TaxonomyPath path;
  std::size_t required_nodes = 2;
  SuiteStage stage = SuiteStage::Component;
  RequiredCapabilities requires_caps;
  std::function<void(TestEnv&)> body;  // throws on failure
};

class TestFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RegistryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TestRegistry {
 public:
  /// Throws RegistryError on a duplicate id, an invalid taxonomy path, or a
  /// stage that disagrees with the path level.
  void add(TestCase test);

  const TestCase* find(std::string_view id) const;
  const TestCase& at(std::string_view id) const;
  const std::vector<TestCase>& tests() const noexcept { return tests_; }
  std::size_t size() const noexcept { return tests_.size(); }

  TestRegistry without(std::string_view id) const;

 private:
  std::vector<TestCase> tests_;
};

TestRegistry register_builtin_suite(const SuiteOptions& options = {});

/// One system test per scenario file, run under System/Functional/Manual.
TestCase scenario_file_test(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Execution

struct Verdict {
  enum class Kind { Pass, Fail, Skip };

  Kind kind = Kind::Pass;
  std::string message;

  static Verdict pass() { return {}; }
  static Verdict fail(std::string m) { return {Kind::Fail, std::move(m)}; }
  static Verdict skip(std::string m) { return {Kind::Skip, std::move(m)}; }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

std::string_view to_string(Verdict::Kind kind);

struct TestResult {
  std::string id;
  Verdict verdict;
  std::chrono::nanoseconds duration{0};
  std::string cluster_log;  // exported event log of the test's cluster
};

struct SuiteResult {
  std::vector<TestResult> results;  // registry order
  std::string profile;
  std::uint64_t seed = 0;

  std::size_t passed() const;
  std::size_t failed() const;
  std::size_t skipped() const;
  std::vector<std::string> failed_ids() const;
  std::chrono::nanoseconds total_duration() const;
};

struct SuiteFilter {
  std::optional<SuiteStage> stage;
  std::string taxonomy_prefix;  // matched against TaxonomyPath::str()

  bool matches(const TestCase& test) const;
};

TestResult run_test(const TestCase& test, const CapabilityProfile& profile,
                    std::uint64_t seed, const SuiteOptions& options = {});

SuiteResult run_suite(const TestRegistry& registry, const SuiteFilter& filter,
                      const CapabilityProfile& profile, std::uint64_t seed,
                      std::size_t parallelism = 1,
                      const SuiteOptions& options = {});

struct CoverageReport {
  std::map<TaxonomyPath, std::size_t> counts;  // every leaf, zeros included
  std::vector<TaxonomyPath> gaps;

  bool complete() const { return gaps.empty(); }
};

CoverageReport coverage_report(const TestRegistry& registry);

}  // namespace dynrm
