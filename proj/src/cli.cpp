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

#include "dynrm/cli.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "dynrm/app_harness.hpp"
#include "dynrm/conformance.hpp"
#include "dynrm/pipeline.hpp"
#include "dynrm/scenario.hpp"
#include "dynrm/state_machine.hpp"

namespace dynrm {

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Scenario load_scenario(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read " + file);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const ParseError& e) {
    throw UsageError(file + ":" + std::to_string(e.line()) + ":" +
                     std::to_string(e.column()) + ": " + e.reason());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

struct PipelineArgs {
  std::string profiles = "full23";
  std::string stages = "build,component,functional,nonfunctional";
  std::uint64_t seed = 0;
  std::uint64_t latency_budget_ms = 5000;
  std::size_t max_nodes = 64;
  std::string scenarios;
  std::string report;
  std::string format = "text";
  std::string registry;
  std::size_t parallelism = 1;
  std::vector<std::string> force_fail;
};

int cmd_pipeline(const PipelineArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig config;
  PipelineResult result;
  try {
    config.profiles = split_list(a.profiles);
    config.stages.clear();
    for (const auto& s : split_list(a.stages)) config.stages.push_back(parse_stage(s));
    config.seed = a.seed;
    config.latency_budget_ms = a.latency_budget_ms;
    config.max_nodes = a.max_nodes;
    config.scenario_dir = a.scenarios;
    config.report_path = a.report;
    config.format = a.format == "structured" ? ReportFormat::Structured
                                             : ReportFormat::Text;
    config.parallelism = a.parallelism;
    config.forced_failures = {a.force_fail.begin(), a.force_fail.end()};

    const ProfileRegistry registry = a.registry.empty()
                                         ? ProfileRegistry::builtin()
                                         : ProfileRegistry::load(a.registry);
    result = config.profiles.size() >= 2 ? run_matrix(config, registry)
                                         : run_pipeline(config, registry);
    out << render_text(result);
    if (!config.report_path.empty()) {
      emit_report(result, config.report_path, config.format);
    }
  } catch (const PipelineError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const RegistryError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return exit_code(result);
}

int cmd_parse(const std::string& file, std::ostream& out) {
  const Scenario scenario = load_scenario(file);
  out << render(scenario);
  std::vector<Delta> deltas;
  try {
    deltas = compute_deltas(scenario);
  } catch (const ScenarioError& e) {
    throw UsageError(file + ": " + e.what());
  }
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    out << "R" << i << "->R" << i + 1 << ": " << render(deltas[i]) << '\n';
  }
  return 0;
}

int cmd_run_scenario(const std::string& file, std::size_t nodes,
                     std::uint64_t seed, std::size_t iterations,
                     std::ostream& out, std::ostream& err) {
  const Scenario scenario = load_scenario(file);
  ClusterState cluster =
      create_cluster(nodes, CapabilityProfile{}, GrantLatency{SimDuration{20}, SimDuration{5}}, seed);
  RunOptions options;
  options.iterations = iterations ? iterations : scenario.steps.size() * 8 + 4;
  options.seed = seed;
  options.assert_invariants = true;
  ExecutionTrace trace;
  try {
    trace = run_app(scenario, cluster, options);
  } catch (const ScenarioError& e) {
    throw UsageError(file + ": " + e.what());
  } catch (const HarnessError& e) {
    if (e.code() == HarnessErrc::PlanInfeasible) throw UsageError(file + ": " + e.what());
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  export_trace(out, trace);
  out << "# process counts:";
  for (auto c : trace.process_counts()) out << ' ' << c;
  out << "\n# reconfigurations: " << trace.reconfigurations
      << "\n# plan completed: " << (trace.plan_completed ? "yes" : "no") << '\n';
  return trace.plan_completed ? 0 : kExitFailure;
}

int cmd_coverage(std::ostream& out) {
  const auto report = coverage_report(register_builtin_suite());
  std::size_t width = 0;
  for (const auto& [leaf, n] : report.counts) width = std::max(width, leaf.str().size());
  for (const auto& [leaf, n] : report.counts) {
    out << std::left << std::setw(static_cast<int>(width + 2)) << leaf.str() << n
        << '\n';
  }
  if (report.complete()) {
    out << "no empty leaves\n";
    return 0;
  }
  out << report.gaps.size() << " empty leaves\n";
  return kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Conformance kit for dynamic resource management", "dynrm-kit"};
  app.require_subcommand(1);

  PipelineArgs pa;
  auto* pipeline = app.add_subcommand("pipeline", "Run the staged test pipeline");
  pipeline->add_option("--profiles", pa.profiles, "Comma-separated profile names")
      ->capture_default_str();
  pipeline->add_option("--stages", pa.stages, "Comma-separated stages")
      ->capture_default_str();
  pipeline->add_option("--seed", pa.seed)->capture_default_str();
  pipeline->add_option("--latency-budget-ms", pa.latency_budget_ms)
      ->capture_default_str();
  pipeline->add_option("--max-nodes", pa.max_nodes)->capture_default_str();
  pipeline->add_option("--scenarios", pa.scenarios, "Directory of .scn files");
  pipeline->add_option("--report", pa.report, "Report output path");
  pipeline->add_option("--format", pa.format)
      ->check(CLI::IsMember({"text", "structured"}))
      ->capture_default_str();
  pipeline->add_option("--profile-registry", pa.registry, "INI profile registry");
  pipeline->add_option("--parallelism", pa.parallelism)->capture_default_str();
  pipeline->add_option("--force-fail", pa.force_fail,
                       "Test id to force to Fail (repeatable)");

  std::string parse_file;
  auto* parse = app.add_subcommand("parse", "Print canonical form and deltas");
  parse->add_option("file", parse_file)->required();

  std::string run_file;
  std::size_t run_nodes = 0, run_iterations = 0;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run-scenario", "Execute a scenario, print its trace");
  run->add_option("file", run_file)->required();
  run->add_option("--nodes", run_nodes)->required()->check(CLI::PositiveNumber);
  run->add_option("--seed", run_seed);
  run->add_option("--iterations", run_iterations, "Default: 8 per step + 4");

  auto* coverage = app.add_subcommand("coverage", "Print taxonomy coverage");
  auto* transitions =
      app.add_subcommand("transitions", "Print the state transition table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*pipeline) return cmd_pipeline(pa, out, err);
    if (*parse) return cmd_parse(parse_file, out);
    if (*run) {
      return cmd_run_scenario(run_file, run_nodes, run_seed, run_iterations, out, err);
    }
    if (*coverage) return cmd_coverage(out);
    if (*transitions) {
      export_transition_table(out);
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace dynrm
