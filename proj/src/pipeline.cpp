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

#include "dynrm/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dynrm/scenario.hpp"
#include "dynrm/state_machine.hpp"

namespace dynrm {

namespace pt = boost::property_tree;

namespace {

constexpr std::string_view kBuiltinProfiles = R"ini(
[legacy17]
batch_submit = false
job_shrink = true
job_kill = true
build_compatible = true

[full23]
batch_submit = true
job_shrink = true
job_kill = true
build_compatible = true

[broken25]
batch_submit = true
job_shrink = true
job_kill = true
build_compatible = false
)ini";

constexpr std::string_view kKnownKeys[] = {"batch_submit", "job_shrink",
                                           "job_kill", "build_compatible"};

constexpr std::string_view kCompilationError = "Compilation error";

std::string normalize(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '-' || c == '_') continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

double seconds(std::chrono::nanoseconds d) {
  return std::chrono::duration<double>(d).count();
}

std::int64_t millis(std::chrono::nanoseconds d) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(d).count();
}

TestResult timed(std::string id, auto&& body) {
  TestResult r;
  r.id = std::move(id);
  const auto start = WallClock::now();
  try {
    body();
  } catch (const std::exception& e) {
    r.verdict = Verdict::fail(e.what());
  }
  r.duration = WallClock::now() - start;
  return r;
}

// Compatibility gate, scenario syntax and a 1-node smoke run.
SuiteResult build_check(const ProfileEntry& entry, const PipelineConfig& config) {
  SuiteResult suite;
  suite.profile = entry.profile.name;
  suite.seed = config.seed;

  TestResult compat;
  compat.id = "build_profile";
  if (!entry.build_compatible) {
    compat.verdict = Verdict::fail(std::string(kCompilationError) + ": profile '" +
                                   entry.profile.name +
                                   "' is not build-compatible");
  }
  suite.results.push_back(compat);

  if (!config.scenario_dir.empty()) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(config.scenario_dir)) {
      if (e.path().extension() == ".scn") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      suite.results.push_back(timed("build_scenario_" + file.stem().string(), [&] {
        std::ifstream in(file);
        std::stringstream buf;
        buf << in.rdbuf();
        try {
          parse_scenario(buf.str());
        } catch (const ParseError& e) {
          throw std::runtime_error(file.filename().string() + ":" +
                                   std::to_string(e.line()) + ":" +
                                   std::to_string(e.column()) + ": " + e.reason());
        }
      }));
    }
  }

  suite.results.push_back(timed("build_smoke", [&] {
    ClusterState cluster = create_cluster(1, entry.profile, {}, config.seed);
    const JobId job = cluster.launch_job(1);
    DmrContext ctx = DmrContext::make(job, 1, 1);
    dmr_init(ctx, EnvSnapshot::valid(std::to_string(job.value)));
    dmr_check(ctx, Suggestion::stay(), cluster);
    dmr_finalize(ctx);
    if (auto v = cluster.find_violation()) throw std::runtime_error(*v);
  }));
  return suite;
}

TestRegistry stage_registry(const PipelineConfig& config, const SuiteOptions& options) {
  TestRegistry registry = register_builtin_suite(options);
  if (!config.scenario_dir.empty()) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(config.scenario_dir)) {
      if (e.path().extension() == ".scn") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) registry.add(scenario_file_test(file));
  }
  return registry;
}

ProfileRow run_profile(const ProfileEntry& entry, const PipelineConfig& config) {
  SuiteOptions options;
  options.latency_budget_ms = config.latency_budget_ms;
  options.max_nodes = config.max_nodes;
  options.forced_failures = config.forced_failures;

  ProfileRow row;
  row.profile = entry.profile.name;
  bool failed = false;
  std::optional<TestRegistry> registry;
  for (PipelineStage stage : config.stages) {
    StageResult sr;
    sr.stage = stage;
    if (failed) {
      row.stages.push_back(std::move(sr));
      continue;
    }
    const auto start = WallClock::now();
    if (stage == PipelineStage::BuildCheck) {
      sr.suite = build_check(entry, config);
    } else {
      if (!registry) registry = stage_registry(config, options);
      SuiteFilter filter;
      filter.stage = stage == PipelineStage::Component  ? SuiteStage::Component
                     : stage == PipelineStage::Functional ? SuiteStage::Functional
                                                          : SuiteStage::NonFunctional;
      sr.suite = run_suite(*registry, filter, entry.profile, config.seed,
                           config.parallelism, options);
    }
    sr.duration = WallClock::now() - start;
    sr.status = sr.suite.failed() > 0 ? StageStatus::Failed : StageStatus::Passed;
    failed = sr.status == StageStatus::Failed;
    row.stages.push_back(std::move(sr));
  }
  return row;
}

}  // namespace

PipelineError::PipelineError(PipelineErrc code, const std::string& what)
    : std::runtime_error(what), code_(code) {}

// ---------------------------------------------------------------------------
// Profile registry

ProfileRegistry ProfileRegistry::builtin() { return parse(kBuiltinProfiles); }

ProfileRegistry ProfileRegistry::parse(std::string_view ini_text) {
  pt::ptree tree;
  std::istringstream in{std::string(ini_text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw PipelineError(PipelineErrc::ConfigError,
                        "profile registry line " + std::to_string(e.line()) +
                            ": " + e.message());
  }
  ProfileRegistry registry;
  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty()) {
      throw PipelineError(PipelineErrc::ConfigError,
                          "profile registry: key '" + name + "' outside a section");
    }
    ProfileEntry entry;
    entry.profile.name = name;
    for (const auto& [key, value] : section) {
      if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), key) ==
          std::end(kKnownKeys)) {
        throw PipelineError(PipelineErrc::ConfigError,
                            "profile '" + name + "': unknown key '" + key + "'");
      }
      auto flag = value.get_value_optional<bool>();
      if (!flag) {
        throw PipelineError(PipelineErrc::ConfigError,
                            "profile '" + name + "': '" + key +
                                "' is not a boolean");
      }
      if (key == "batch_submit") entry.profile.supports_batch_submit = *flag;
      if (key == "job_shrink") entry.profile.supports_job_shrink = *flag;
      if (key == "job_kill") entry.profile.supports_job_kill = *flag;
      if (key == "build_compatible") entry.build_compatible = *flag;
    }
    registry.add(std::move(entry));
  }
  return registry;
}

ProfileRegistry ProfileRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw PipelineError(PipelineErrc::ConfigError,
                        "cannot read profile registry " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void ProfileRegistry::add(ProfileEntry entry) {
  for (const auto& e : entries_) {
    if (e.profile.name == entry.profile.name) {
      throw PipelineError(PipelineErrc::ConfigError,
                          "duplicate profile '" + entry.profile.name + "'");
    }
  }
  entries_.push_back(std::move(entry));
}

const ProfileEntry& ProfileRegistry::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.profile.name == name) return e;
  }
  throw PipelineError(PipelineErrc::UnknownProfile,
                      "unknown profile '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Stages and config

std::string_view to_string(PipelineStage stage) {
  switch (stage) {
    case PipelineStage::BuildCheck: return "BuildCheck";
    case PipelineStage::Component: return "Component";
    case PipelineStage::Functional: return "Functional";
    case PipelineStage::NonFunctional: return "NonFunctional";
  }
  return "?";
}

PipelineStage parse_stage(std::string_view name) {
  const std::string n = normalize(name);
  if (n == "build" || n == "buildcheck") return PipelineStage::BuildCheck;
  if (n == "component") return PipelineStage::Component;
  if (n == "functional") return PipelineStage::Functional;
  if (n == "nonfunctional") return PipelineStage::NonFunctional;
  throw PipelineError(PipelineErrc::ConfigError,
                      "unknown stage '" + std::string(name) + "'");
}

std::string_view to_string(StageStatus status) {
  switch (status) {
    case StageStatus::Passed: return "Passed";
    case StageStatus::Failed: return "Failed";
    case StageStatus::NotRun: return "NotRun";
  }
  return "?";
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) {
    throw PipelineError(PipelineErrc::ConfigError, m);
  };
  if (profiles.empty()) fail("at least one profile is required");
  if (stages.empty()) fail("at least one stage is required");
  for (std::size_t i = 1; i < stages.size(); ++i) {
    if (stages[i] <= stages[i - 1]) {
      fail("stages must be unique and in canonical order "
           "(BuildCheck, Component, Functional, NonFunctional)");
    }
  }
  if (latency_budget_ms == 0) fail("latency budget must be positive");
  if (max_nodes == 0) fail("max nodes must be positive");
  if (parallelism == 0) fail("parallelism must be positive");
  if (!scenario_dir.empty() && !std::filesystem::is_directory(scenario_dir)) {
    fail("scenario directory " + scenario_dir.string() + " does not exist");
  }
}

// ---------------------------------------------------------------------------
// Results

StageStatus ProfileRow::status() const {
  for (const auto& s : stages) {
    if (s.status == StageStatus::Failed) return StageStatus::Failed;
  }
  return StageStatus::Passed;
}

std::chrono::nanoseconds ProfileRow::duration() const {
  std::chrono::nanoseconds total{0};
  for (const auto& s : stages) total += s.duration;
  return total;
}

std::string ProfileRow::reason() const {
  for (const auto& s : stages) {
    if (s.status != StageStatus::Failed) continue;
    if (s.stage == PipelineStage::BuildCheck) {
      const auto ids = s.suite.failed_ids();
      if (std::find(ids.begin(), ids.end(), "build_profile") != ids.end()) {
        return std::string(kCompilationError);
      }
    }
    return std::to_string(s.suite.failed()) + " tests not passed";
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << seconds(duration()) << " seconds";
  return os.str();
}

bool PipelineResult::all_passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const ProfileRow& r) {
    return r.status() == StageStatus::Passed;
  });
}

PipelineResult run_pipeline(const PipelineConfig& config,
                            const ProfileRegistry& profiles) {
  config.validate();
  std::vector<const ProfileEntry*> entries;
  for (const auto& name : config.profiles) entries.push_back(&profiles.at(name));

  PipelineResult result;
  result.seed = config.seed;
  for (const ProfileEntry* e : entries) result.rows.push_back(run_profile(*e, config));
  return result;
}

PipelineResult run_matrix(const PipelineConfig& config,
                          const ProfileRegistry& profiles) {
  if (config.profiles.size() < 2) {
    throw PipelineError(PipelineErrc::ConfigError,
                        "matrix mode needs at least two profiles");
  }
  return run_pipeline(config, profiles);
}

int exit_code(const PipelineResult& result) { return result.all_passed() ? 0 : 1; }

std::string render_text(const PipelineResult& result) {
  std::size_t width = std::string_view("Version (Profile)").size();
  for (const auto& r : result.rows) width = std::max(width, r.profile.size());
  width += 2;

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "Version (Profile)"
     << std::setw(8) << "Status"
     << "Time/Reason\n";
  os << std::string(width + 8 + 24, '-') << '\n';
  for (const auto& r : result.rows) {
    os << std::setw(static_cast<int>(width)) << r.profile << std::setw(8)
       << to_string(r.status()) << r.reason() << '\n';
  }
  os << '\n';
  for (const auto& r : result.rows) {
    os << r.profile << ':';
    for (const auto& s : r.stages) {
      os << ' ' << to_string(s.stage) << '=' << to_string(s.status);
      if (s.status != StageStatus::NotRun) {
        os << '(' << s.suite.passed() << '/' << s.suite.results.size() << ')';
      }
    }
    os << '\n';
    for (const auto& s : r.stages) {
      for (const auto& t : s.suite.results) {
        if (t.verdict.kind != Verdict::Kind::Fail) continue;
        os << "  FAIL " << to_string(s.stage) << ' ' << t.id << ": "
           << t.verdict.message << '\n';
      }
    }
  }
  return os.str();
}

nlohmann::json to_json(const SuiteResult& suite) {
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : suite.results) {
    tests.push_back({{"id", t.id},
                     {"verdict", std::string(to_string(t.verdict.kind))},
                     {"message", t.verdict.message},
                     {"duration_ms", millis(t.duration)},
                     {"profile", suite.profile},
                     {"seed", suite.seed}});
  }
  return {{"profile", suite.profile},
          {"seed", suite.seed},
          {"passed", suite.passed()},
          {"failed", suite.failed()},
          {"skipped", suite.skipped()},
          {"tests", std::move(tests)}};
}

nlohmann::json to_json(const PipelineResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : r.stages) {
      nlohmann::json st = {{"stage", std::string(to_string(s.stage))},
                           {"status", std::string(to_string(s.status))},
                           {"duration_ms", millis(s.duration)}};
      if (s.status != StageStatus::NotRun) st["suite"] = to_json(s.suite);
      stages.push_back(std::move(st));
    }
    const bool passed = r.status() == StageStatus::Passed;
    rows.push_back({{"profile", r.profile},
                    {"status", std::string(to_string(r.status()))},
                    {"reason", passed ? std::string() : r.reason()},
                    {"duration_ms", millis(r.duration())},
                    {"stages", std::move(stages)}});
  }
  return {{"seed", result.seed},
          {"all_passed", result.all_passed()},
          {"exit_code", exit_code(result)},
          {"profiles", std::move(rows)}};
}

void emit_report(const PipelineResult& result, const std::filesystem::path& path,
                 ReportFormat format) {
  std::ofstream out(path);
  if (!out) {
    throw PipelineError(PipelineErrc::IoError, "cannot write report " + path.string());
  }
  if (format == ReportFormat::Text) {
    out << render_text(result);
  } else {
    out << to_json(result).dump(2) << '\n';
  }
  out.flush();
  if (!out) {
    throw PipelineError(PipelineErrc::IoError, "write to " + path.string() + " failed");
  }
}

}  // namespace dynrm
