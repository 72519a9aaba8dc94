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

#include "dynrm/scenario.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

namespace dynrm {
namespace {

constexpr const char* kListing =
    "R0: J0[p0]\n"
    "R1: J0[p0], J1[p1-p2]\n"
    "R2: J0[p0], J1[p1-p2], J2[p3-p6]\n"
    "R3: J0[p0], J1[p1-p2], J2[p3-p6], J3[p7-p9]\n"
    "R4: J0[p0], J1[p1-p2], J2[p3]\n"
    "R5: J0[p0]\n";

std::vector<std::size_t> counts(const Scenario& s) {
  std::vector<std::size_t> out;
  for (const auto& step : s.steps) out.push_back(total_processes(step));
  return out;
}

ParseError parse_error(std::string_view text) {
  try {
    parse_scenario(text);
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "parsed: " << text;
  return ParseError(0, 0, "");
}

TEST(ParseScenario, ListingCounts) {
  EXPECT_EQ(counts(parse_scenario(kListing)),
            (std::vector<std::size_t>{1, 3, 7, 10, 4, 1}));
}

TEST(ParseScenario, SingleStep) {
  const auto s = parse_scenario("R0: J0[p0]");
  ASSERT_EQ(s.steps.size(), 1u);
  ASSERT_EQ(s.steps[0].layouts.size(), 1u);
  EXPECT_EQ(total_processes(s.steps[0]), 1u);
}

TEST(ParseScenario, InvertedRange) {
  const auto e = parse_error("R0: J0[p2-p1]");
  EXPECT_EQ(e.line(), 1u);
  EXPECT_EQ(e.column(), 8u);
  EXPECT_NE(e.reason().find("inverted"), std::string::npos);
}

TEST(ParseScenario, ErrorPositions) {
  EXPECT_EQ(parse_error("R0: J0[p0]\nR2: J0[p0]").line(), 2u);
  EXPECT_EQ(parse_error("R0: J0[p0], J0[p1]").column(), 13u);
  EXPECT_EQ(parse_error("R0: J0[p0-p2], J1[p2]").column(), 16u);
  EXPECT_EQ(parse_error("R0: J0[p0] x").column(), 12u);
  EXPECT_EQ(parse_error("R0 J0[p0]").column(), 4u);
  EXPECT_EQ(parse_error("").line(), 1u);
  EXPECT_EQ(parse_error("R1: J0[p0]").line(), 1u);
  EXPECT_EQ(parse_error("R0: J0[p99999999999]").column(), 9u);
}

TEST(ParseScenario, CommentsBlankLinesAndCrlf) {
  const auto s = parse_scenario("# header\n\nR0: J0[p0]\r\n  # note\nR1:J0[p0] ,J1[ p1 - p2 ]\n");
  EXPECT_EQ(render(s), "R0: J0[p0]\nR1: J0[p0], J1[p1-p2]\n");
}

TEST(ComputeDeltas, ListingShrinkSteps) {
  const auto deltas = compute_deltas(parse_scenario(kListing));
  ASSERT_EQ(deltas.size(), 5u);
  EXPECT_EQ(render(deltas[3]), "{J0: Unchanged, J1: Unchanged, J2: ShrinkTo(1), J3: Kill}");
  EXPECT_EQ(render(deltas[4]), "{J0: Unchanged, J1: Kill, J2: Kill}");
  EXPECT_EQ(render(deltas[0]), "{J0: Unchanged, J1: NewJob(2)}");
}

TEST(ComputeDeltas, IdenticalStepsUnchanged) {
  const auto deltas = compute_deltas(parse_scenario("R0: J0[p0], J1[p1]\nR1: J0[p0], J1[p1]\n"));
  ASSERT_EQ(deltas.size(), 1u);
  for (const auto& [job, action] : deltas[0]) {
    EXPECT_EQ(action.kind, JobAction::Kind::Unchanged);
  }
}

TEST(ComputeDeltas, GrowingExistingJobRejected) {
  try {
    compute_deltas(parse_scenario("R0: J0[p0]\nR1: J0[p0-p1]\n"));
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.code(), ScenarioError::Code::UnsupportedGrowth);
  }
}

TEST(TotalProcesses, Examples) {
  const auto s = parse_scenario(kListing);
  EXPECT_EQ(total_processes(s.steps[2]), 7u);
  EXPECT_EQ(total_processes(s.steps[0]), 1u);
  EXPECT_EQ(total_processes(parse_scenario("R0: J0[p0], J1[p1-p4]").steps[0]), 5u);
}

TEST(LinearScenario, Staircase) {
  EXPECT_EQ(counts(linear_scenario(1, 3, 1)), (std::vector<std::size_t>{1, 2, 3, 2, 1}));
  EXPECT_EQ(counts(linear_scenario(2, 2, 1)), (std::vector<std::size_t>{2}));
  EXPECT_EQ(counts(linear_scenario(1, 6, 2)), (std::vector<std::size_t>{1, 3, 5, 6, 5, 3, 1}));
}

TEST(LinearScenario, InvalidRange) {
  try {
    linear_scenario(3, 1, 1);
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.code(), ScenarioError::Code::InvalidRange);
  }
  EXPECT_THROW(linear_scenario(0, 3, 1), ScenarioError);
  EXPECT_THROW(linear_scenario(1, 3, 0), ScenarioError);
}

// Builds a random valid scenario whose steps only add new jobs, shrink or
// kill existing ones.
Scenario random_scenario(std::mt19937_64& rng) {
  Scenario s;
  std::map<std::uint32_t, std::uint32_t> sizes{{0, 1 + static_cast<std::uint32_t>(rng() % 3)}};
  std::uint32_t next_job = 1;
  const auto steps = 1 + rng() % 6;
  for (std::uint32_t k = 0; k < steps; ++k) {
    if (k > 0) {
      for (auto it = sizes.begin(); it != sizes.end();) {
        const auto roll = rng() % 4;
        if (roll == 0 && it->first != 0) {
          it = sizes.erase(it);
          continue;
        }
        if (roll == 1 && it->second > 1) it->second -= 1 + rng() % (it->second - 1);
        ++it;
      }
      if (rng() % 2) sizes[next_job++] = 1 + rng() % 4;
    }
    Step step{k, {}};
    std::uint32_t p = static_cast<std::uint32_t>(rng() % 3);
    for (const auto& [job, size] : sizes) {
      step.layouts.push_back({job, {p, p + size - 1}});
      p += size + static_cast<std::uint32_t>(rng() % 2);
    }
    s.steps.push_back(step);
  }
  return s;
}

TEST(ScenarioProperty, RenderParseRoundtrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const Scenario s = random_scenario(rng);
    const std::string text = render(s);
    EXPECT_EQ(render(parse_scenario(text)), text);
    // Whitespace noise canonicalizes to the same text.
    std::string noisy;
    for (char c : text) {
      noisy += c;
      if (c == ',' || c == ':') noisy += "   ";
    }
    EXPECT_EQ(render(parse_scenario(noisy)), text);
  }
}

TEST(ScenarioProperty, DeltaReplayReconstructsEverySize) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    const Scenario s = random_scenario(rng);
    const auto deltas = compute_deltas(s);
    ASSERT_EQ(deltas.size(), s.steps.size() - 1);
    std::map<std::uint32_t, std::size_t> sizes;
    for (const auto& l : s.steps[0].layouts) sizes[l.job] = l.procs.size();
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      std::size_t added = 0, removed = 0;
      for (const auto& [job, action] : deltas[k]) {
        switch (action.kind) {
          case JobAction::Kind::NewJob:
            sizes[job] = action.count;
            added += action.count;
            break;
          case JobAction::Kind::Kill:
            removed += sizes[job];
            sizes.erase(job);
            break;
          case JobAction::Kind::ShrinkTo:
            removed += sizes[job] - action.count;
            sizes[job] = action.count;
            break;
          default:
            break;
        }
      }
      std::map<std::uint32_t, std::size_t> want;
      for (const auto& l : s.steps[k + 1].layouts) want[l.job] = l.procs.size();
      ASSERT_EQ(sizes, want);
      EXPECT_EQ(total_processes(s.steps[k + 1]),
                total_processes(s.steps[k]) + added - removed);
    }
  }
}

TEST(ScenarioProperty, LinearAlwaysParses) {
  for (std::size_t min = 1; min <= 6; ++min) {
    for (std::size_t max = min; max <= 12; ++max) {
      for (std::size_t step = 1; step <= 4; ++step) {
        const Scenario s = linear_scenario(min, max, step);
        const Scenario back = parse_scenario(render(s));
        EXPECT_EQ(render(back), render(s));
        EXPECT_NO_THROW(compute_deltas(back));
        const auto c = counts(back);
        EXPECT_EQ(c.front(), min);
        EXPECT_EQ(*std::max_element(c.begin(), c.end()), max);
      }
    }
  }
}

}  // namespace
}  // namespace dynrm
