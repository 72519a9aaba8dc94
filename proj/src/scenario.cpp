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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace dynrm {

namespace {

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t line_no)
      : line_(line), line_no_(line_no) {}

  Step parse_step() {
    skip_ws();
    Step step;
    step.index = prefixed_uint('R', "step label 'R<k>'");
    skip_ws();
    expect(':');
    std::set<std::uint32_t> seen_jobs;
    do {
      skip_ws();
      const std::size_t job_col = pos_;
      JobLayout layout = parse_layout();
      if (!seen_jobs.insert(layout.job).second) {
        fail(job_col, "duplicate job J" + std::to_string(layout.job));
      }
      for (const auto& other : step.layouts) {
        if (other.procs.overlaps(layout.procs)) {
          fail(job_col, "process range of J" + std::to_string(layout.job) +
                            " overlaps J" + std::to_string(other.job));
        }
      }
      step.layouts.push_back(layout);
      skip_ws();
    } while (accept(','));
    skip_ws();
    if (pos_ != line_.size()) fail(pos_, "unexpected trailing input");
    return step;
  }

  [[noreturn]] void fail(std::size_t pos, std::string reason) const {
    throw ParseError(line_no_, pos + 1, std::move(reason));
  }

 private:
  JobLayout parse_layout() {
    JobLayout layout;
    layout.job = prefixed_uint('J', "job 'J<i>'");
    skip_ws();
    expect('[');
    skip_ws();
    const std::size_t range_col = pos_;
    layout.procs.lo = prefixed_uint('p', "process 'p<n>'");
    layout.procs.hi = layout.procs.lo;
    skip_ws();
    if (accept('-')) {
      skip_ws();
      layout.procs.hi = prefixed_uint('p', "process 'p<n>'");
      skip_ws();
    }
    expect(']');
    if (layout.procs.hi < layout.procs.lo) {
      fail(range_col, "inverted range p" + std::to_string(layout.procs.lo) +
                          "-p" + std::to_string(layout.procs.hi));
    }
    return layout;
  }

  std::uint32_t prefixed_uint(char prefix, std::string_view what) {
    if (pos_ >= line_.size() || line_[pos_] != prefix) {
      fail(pos_, "expected " + std::string(what));
    }
    ++pos_;
    const std::size_t start = pos_;
    std::uint32_t value = 0;
    auto [p, ec] = std::from_chars(line_.data() + pos_,
                                   line_.data() + line_.size(), value);
    if (ec == std::errc::result_out_of_range) fail(start, "number too large");
    if (ec != std::errc{}) fail(start, "expected digits after '" +
                                           std::string(1, prefix) + "'");
    pos_ = static_cast<std::size_t>(p - line_.data());
    return value;
  }

  void expect(char c) {
    if (!accept(c)) fail(pos_, std::string("expected '") + c + "'");
  }

  bool accept(char c) {
    if (pos_ < line_.size() && line_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void skip_ws() {
    while (pos_ < line_.size() &&
           std::isspace(static_cast<unsigned char>(line_[pos_]))) {
      ++pos_;
    }
  }

  std::string_view line_;
  std::size_t line_no_;
  std::size_t pos_ = 0;
};

bool is_blank_or_comment(std::string_view line) {
  auto it = std::find_if_not(line.begin(), line.end(), [](unsigned char c) {
    return std::isspace(c);
  });
  return it == line.end() || *it == '#';
}

std::string render_range(const ProcRange& r) {
  std::string s = "p" + std::to_string(r.lo);
  if (r.hi != r.lo) s += "-p" + std::to_string(r.hi);
  return s;
}

}  // namespace

ParseError::ParseError(std::size_t line, std::size_t column, std::string reason)
    : std::runtime_error("line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + reason),
      line_(line),
      column_(column),
      reason_(std::move(reason)) {}

const JobLayout* Step::find(std::uint32_t job) const {
  auto it = std::find_if(layouts.begin(), layouts.end(),
                         [&](const JobLayout& l) { return l.job == job; });
  return it == layouts.end() ? nullptr : &*it;
}

Scenario parse_scenario(std::string_view text) {
  Scenario scenario;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (is_blank_or_comment(line)) continue;

    LineParser parser(line, line_no);
    Step step = parser.parse_step();
    if (step.index != scenario.steps.size()) {
      const auto col = line.find('R');
      parser.fail(col, "expected step R" + std::to_string(scenario.steps.size()) +
                           ", found R" + std::to_string(step.index));
    }
    scenario.steps.push_back(std::move(step));
  }
  if (scenario.steps.empty()) {
    throw ParseError(line_no == 0 ? 1 : line_no, 1,
                     "scenario has no initial configuration R0");
  }
  return scenario;
}

std::string render(const Step& step) {
  std::string out = "R" + std::to_string(step.index) + ":";
  for (std::size_t i = 0; i < step.layouts.size(); ++i) {
    const auto& l = step.layouts[i];
    out += i == 0 ? " " : ", ";
    out += "J" + std::to_string(l.job) + "[" + render_range(l.procs) + "]";
  }
  return out;
}

std::string render(const Scenario& scenario) {
  std::string out;
  for (const auto& step : scenario.steps) out += render(step) + "\n";
  return out;
}

std::string to_string(const JobAction& a) {
  switch (a.kind) {
    case JobAction::Kind::NewJob: return "NewJob(" + std::to_string(a.count) + ")";
    case JobAction::Kind::Grow: return "Grow(" + std::to_string(a.count) + ")";
    case JobAction::Kind::ShrinkTo: return "ShrinkTo(" + std::to_string(a.count) + ")";
    case JobAction::Kind::Kill: return "Kill";
    case JobAction::Kind::Unchanged: return "Unchanged";
  }
  return "?";
}

std::string render(const Delta& delta) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (const auto& [job, action] : delta) {
    os << (first ? "" : ", ") << 'J' << job << ": " << to_string(action);
    first = false;
  }
  os << '}';
  return os.str();
}

std::vector<Delta> compute_deltas(const Scenario& scenario) {
  std::vector<Delta> deltas;
  for (std::size_t i = 1; i < scenario.steps.size(); ++i) {
    const Step& prev = scenario.steps[i - 1];
    const Step& next = scenario.steps[i];
    Delta delta;
    for (const auto& l : prev.layouts) {
      const JobLayout* after = next.find(l.job);
      if (!after) {
        delta[l.job] = JobAction::kill();
      } else if (after->procs.size() < l.procs.size()) {
        delta[l.job] = JobAction::shrink_to(after->procs.size());
      } else if (after->procs.size() > l.procs.size()) {
        throw ScenarioError(ScenarioError::Code::UnsupportedGrowth,
                            "R" + std::to_string(next.index) + ": job J" +
                                std::to_string(l.job) +
                                " enlarges its range; expansions must arrive "
                                "in a new job");
      } else {
        delta[l.job] = JobAction::unchanged();
      }
    }
    for (const auto& l : next.layouts) {
      if (!prev.find(l.job)) delta[l.job] = JobAction::new_job(l.procs.size());
    }
    deltas.push_back(std::move(delta));
  }
  return deltas;
}

std::size_t total_processes(const Step& step) {
  std::size_t n = 0;
  for (const auto& l : step.layouts) n += l.procs.size();
  return n;
}

Scenario linear_scenario(std::size_t min, std::size_t max, std::size_t step) {
  if (min == 0 || step == 0 || min > max) {
    throw ScenarioError(ScenarioError::Code::InvalidRange,
                        "linear scenario needs 1 <= min <= max and step >= 1");
  }
  Scenario scenario;
  std::vector<JobLayout> layouts = {
      {0, {0, static_cast<std::uint32_t>(min - 1)}}};
  auto push = [&] {
    scenario.steps.push_back(
        Step{static_cast<std::uint32_t>(scenario.steps.size()), layouts});
  };
  push();
  std::size_t current = min;
  while (current < max) {
    const std::size_t add = std::min(step, max - current);
    const auto job = static_cast<std::uint32_t>(layouts.size());
    layouts.push_back({job,
                       {static_cast<std::uint32_t>(current),
                        static_cast<std::uint32_t>(current + add - 1)}});
    current += add;
    push();
  }
  while (layouts.size() > 1) {
    layouts.pop_back();
    push();
  }
  return scenario;
}

}  // namespace dynrm
