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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace dynrm {
namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dynrm-kit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

const std::string kScenario = DYNRM_SOURCE_DIR "/scenarios/nonlinear.scn";

TEST(Cli, ParsePrintsDeltas) {
  const auto r = cli({"parse", kScenario});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("R3->R4: {J0: Unchanged, J1: Unchanged, J2: ShrinkTo(1), J3: Kill}"),
            std::string::npos)
      << r.out;
}

TEST(Cli, ParseErrorIsUsageError) {
  const auto p = write_temp("dynrm-cli-bad.scn", "R0: J0[p2-p1]\n");
  const auto r = cli({"parse", p.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(":1:8:"), std::string::npos) << r.err;
}

TEST(Cli, RunScenarioCounts) {
  const auto r = cli({"run-scenario", kScenario, "--nodes", "10"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# process counts: 1 3 7 10 4 1"), std::string::npos) << r.out;
}

TEST(Cli, RunScenarioGrowthRejected) {
  const auto p = write_temp("dynrm-cli-grow.scn", "R0: J0[p0]\nR1: J0[p0-p1]\n");
  EXPECT_EQ(cli({"run-scenario", p.string(), "--nodes", "4"}).code, 2);
}

TEST(Cli, RunScenarioTooFewNodes) {
  EXPECT_EQ(cli({"run-scenario", kScenario, "--nodes", "5"}).code, 2);
}

TEST(Cli, Coverage) {
  const auto r = cli({"coverage"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("System/Functional/Policy"), std::string::npos);
}

TEST(Cli, PipelineExitCodes) {
  EXPECT_EQ(cli({"pipeline", "--profiles", "full23", "--max-nodes", "8"}).code, 0);
  EXPECT_EQ(cli({"pipeline", "--profiles", "legacy17", "--max-nodes", "8"}).code, 1);
  EXPECT_EQ(cli({"pipeline", "--profiles", "unknown"}).code, 2);
  EXPECT_EQ(cli({"pipeline", "--stages", "functional,component"}).code, 2);
  EXPECT_EQ(cli({"pipeline", "--report", "/nonexistent-dir/x/r.txt", "--max-nodes", "8"}).code,
            2);
  EXPECT_EQ(cli({"pipeline", "--bogus"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
}

TEST(Cli, ForcedFailureStopsLaterStages) {
  const auto r = cli({"pipeline", "--profiles", "full23", "--max-nodes", "8", "--force-fail",
                      "test_check_should_stay"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("Functional=NotRun"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("NonFunctional=NotRun"), std::string::npos) << r.out;
}

TEST(Cli, StructuredReportFile) {
  const auto path = std::filesystem::temp_directory_path() / "dynrm-cli-report.json";
  const auto r = cli({"pipeline", "--profiles", "legacy17,full23", "--max-nodes", "8",
                      "--format", "structured", "--report", path.string()});
  EXPECT_EQ(r.code, 1);
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  EXPECT_NE(buf.str().find("\"legacy17\""), std::string::npos);
  std::filesystem::remove(path);
}

TEST(Cli, ProfileRegistryFile) {
  const auto r = cli({"pipeline", "--profile-registry", DYNRM_SOURCE_DIR "/profiles/slurm_versions.ini",
                      "--profiles", "slurm-23.11", "--stages", "build,component"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
}

}  // namespace
}  // namespace dynrm
