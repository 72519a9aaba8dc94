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

#include "dynrm/state_machine.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>

namespace dynrm {

namespace {

using S = MalleabilityState;

constexpr TransitionRule kRules[] = {
    {S::Uninitialized, DmrEvent::Init, S::NoPendingReconfiguration,
     "preconditions && reconfig_count == 0"},
    {S::Uninitialized, DmrEvent::Init, S::WaitForDataReceive,
     "preconditions && reconfig_count > 0"},
    {S::WaitForDataReceive, DmrEvent::Reconfigure, S::NoPendingReconfiguration,
     "slurm_remove_resources"},
    {S::WaitForDataReceive, DmrEvent::CompleteDataPhase,
     S::NoPendingReconfiguration, "receive && !removal_pending"},
    {S::WaitForDataReceive, DmrEvent::Finalize, S::Finalized, ""},
    {S::NoPendingReconfiguration, DmrEvent::Check, S::NoPendingReconfiguration,
     "inhibited || SHOULD_STAY || bad_req"},
    {S::NoPendingReconfiguration, DmrEvent::Check, S::WaitForScheduler,
     "valid grow request"},
    {S::NoPendingReconfiguration, DmrEvent::Check, S::WaitForApplication,
     "valid shrink request"},
    {S::NoPendingReconfiguration, DmrEvent::Finalize, S::Finalized, ""},
    {S::WaitForScheduler, DmrEvent::Check, S::WaitForScheduler, "!slurm_ready"},
    {S::WaitForScheduler, DmrEvent::Check, S::NoPendingReconfiguration,
     "timeout expired"},
    {S::WaitForScheduler, DmrEvent::Check, S::WaitForApplication,
     "slurm_ready"},
    {S::WaitForScheduler, DmrEvent::Finalize, S::Finalized, ""},
    {S::WaitForApplication, DmrEvent::Reconfigure, S::WaitForDataSend,
     "grow: add_new_processes"},
    {S::WaitForApplication, DmrEvent::Reconfigure, S::WaitForDataSend,
     "shrink: mark victims"},
    {S::WaitForApplication, DmrEvent::Finalize, S::Finalized, "wasted resize"},
    {S::WaitForDataSend, DmrEvent::CompleteDataPhase, S::NoPendingReconfiguration,
     "send && grow"},
    {S::WaitForDataSend, DmrEvent::CompleteDataPhase, S::WaitForDataReceive,
     "send && shrink"},
    {S::WaitForDataSend, DmrEvent::Finalize, S::Finalized, "wasted resize"},
};

[[noreturn]] void wrong_state(DmrEvent event, MalleabilityState state) {
  throw DmrError(DmrErrc::WrongState, std::string(event_name(event)) +
                                          " is not enabled in state " +
                                          std::string(to_string(state)));
}

void require(const DmrContext& ctx, DmrEvent event,
             std::initializer_list<MalleabilityState> states) {
  if (std::find(states.begin(), states.end(), ctx.state) == states.end()) {
    wrong_state(event, ctx.state);
  }
}

void move_to(DmrContext& ctx, DmrEvent event, MalleabilityState to) {
  ctx.history.push_back(TransitionRecord{event, ctx.state, to});
  ctx.state = to;
}

void finish_cycle(DmrContext& ctx) {
  ctx.active_request.reset();
  ++ctx.reconfig_count;
  ctx.inhibition_remaining = ctx.inhibition_window;
}

// Parses "major.minor[.patch]" and compares to `minimum` on (major, minor).
bool version_at_least(std::string_view version, std::string_view minimum) {
  auto parse = [](std::string_view v, int& major, int& minor) {
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, major);
    if (ec != std::errc{}) return false;
    minor = 0;
    if (p != end && *p == '.') {
      auto [q, ec2] = std::from_chars(p + 1, end, minor);
      if (ec2 != std::errc{}) return false;
    }
    return true;
  };
  int major = 0, minor = 0, min_major = 0, min_minor = 0;
  if (!parse(version, major, minor)) return false;
  parse(minimum, min_major, min_minor);
  return major > min_major || (major == min_major && minor >= min_minor);
}

}  // namespace

std::string_view to_string(MalleabilityState state) {
  switch (state) {
    case S::Uninitialized: return "Uninitialized";
    case S::WaitForDataReceive: return "WaitForDataReceive";
    case S::NoPendingReconfiguration: return "NoPendingReconfiguration";
    case S::WaitForScheduler: return "WaitForScheduler";
    case S::WaitForApplication: return "WaitForApplication";
    case S::WaitForDataSend: return "WaitForDataSend";
    case S::Finalized: return "Finalized";
  }
  return "Unknown";
}

std::string_view state_letter(MalleabilityState state) {
  switch (state) {
    case S::Uninitialized: return "A";
    case S::WaitForDataReceive: return "B";
    case S::NoPendingReconfiguration: return "C";
    case S::WaitForScheduler: return "D";
    case S::WaitForApplication: return "E";
    case S::WaitForDataSend: return "F";
    case S::Finalized: return "Z";
  }
  return "?";
}

std::string_view event_name(DmrEvent event) {
  switch (event) {
    case DmrEvent::Init: return "dmr_init";
    case DmrEvent::Check: return "dmr_check";
    case DmrEvent::Reconfigure: return "dmr_reconfigure";
    case DmrEvent::CompleteDataPhase: return "complete_data_phase";
    case DmrEvent::Finalize: return "dmr_finalize";
  }
  return "unknown";
}

std::string_view to_string(DmrErrc code) {
  switch (code) {
    case DmrErrc::WrongState: return "WrongState";
    case DmrErrc::MissingJobId: return "MissingJobId";
    case DmrErrc::MissingEnvVar: return "MissingEnvVar";
    case DmrErrc::DependencyTooOld: return "DependencyTooOld";
    case DmrErrc::BadArgCount: return "BadArgCount";
    case DmrErrc::NullArgs: return "NullArgs";
    case DmrErrc::EmptyProgramName: return "EmptyProgramName";
    case DmrErrc::SpawnFailed: return "SpawnFailed";
    case DmrErrc::RemovalFailed: return "RemovalFailed";
    case DmrErrc::SchedulerError: return "SchedulerError";
  }
  return "Unknown";
}

DmrError::DmrError(DmrErrc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code) {}

EnvSnapshot EnvSnapshot::valid(std::string job_id, std::string program) {
  EnvSnapshot env;
  env.job_id = std::move(job_id);
  env.dmr_vars = {{"DMR_RUNTIME_VERSION", "2.1"}, {"DMR_CHECK_PERIOD", "1"}};
  env.arg_count = 1;
  env.args = {std::move(program)};
  return env;
}

std::string to_string(const Suggestion& s) {
  switch (s.kind) {
    case Suggestion::Kind::ShouldExpand:
      return "SHOULD_EXPAND(" + std::to_string(s.delta_nodes) + ")";
    case Suggestion::Kind::ShouldShrink:
      return "SHOULD_SHRINK(" + std::to_string(s.delta_nodes) + ")";
    case Suggestion::Kind::ShouldStay: return "SHOULD_STAY";
  }
  return "?";
}

std::string to_string(const CheckOutcome& outcome) {
  using K = CheckOutcome::Kind;
  switch (outcome.kind) {
    case K::NoAction:
      switch (outcome.reason) {
        case NoActionReason::Inhibited: return "NoAction(Inhibited)";
        case NoActionReason::StaySuggested: return "NoAction(StaySuggested)";
        case NoActionReason::BadRequest: return "NoAction(BadRequest)";
      }
      break;
    case K::RequestSubmitted: return "RequestSubmitted";
    case K::StillPending: return "StillPending";
    case K::Expired: return "Expired";
    case K::Granted: return "Granted";
  }
  return "?";
}

DmrContext DmrContext::make(JobId launch_job, std::size_t min_nodes,
                            std::size_t max_nodes) {
  if (min_nodes == 0 || min_nodes > max_nodes) {
    throw std::invalid_argument("node limits must satisfy 1 <= min <= max");
  }
  DmrContext ctx;
  ctx.min_nodes = min_nodes;
  ctx.max_nodes = max_nodes;
  ctx.job_handle = launch_job;
  ctx.jobs = {launch_job};
  return ctx;
}

std::size_t DmrContext::allocation(const ClusterState& cluster) const {
  std::size_t total = 0;
  for (JobId id : jobs) {
    const Job& j = cluster.job(id);
    if (j.status == JobStatus::Running) total += j.nodes.size();
  }
  return total;
}

bool DmrContext::removal_pending() const {
  return active_request && active_request->kind == ResizeKind::Shrink;
}

void dmr_init(DmrContext& ctx, const EnvSnapshot& env) {
  require(ctx, DmrEvent::Init, {S::Uninitialized});
  if (!env.job_id || env.job_id->empty()) {
    throw DmrError(DmrErrc::MissingJobId, "no scheduler job id in environment");
  }
  for (std::string_view name : kRequiredEnvVars) {
    if (!env.dmr_vars.contains(std::string(name))) {
      throw DmrError(DmrErrc::MissingEnvVar, std::string(name));
    }
  }
  const auto& version = env.dmr_vars.at("DMR_RUNTIME_VERSION");
  if (!version_at_least(version, kMinRuntimeVersion)) {
    throw DmrError(DmrErrc::DependencyTooOld,
                   "runtime " + version + " < " +
                       std::string(kMinRuntimeVersion));
  }
  if (env.arg_count <= 0) {
    throw DmrError(DmrErrc::BadArgCount,
                   "argument count " + std::to_string(env.arg_count));
  }
  if (env.args.empty() || !env.args.front()) {
    throw DmrError(DmrErrc::NullArgs, "argument vector or argv[0] is NULL");
  }
  if (env.args.front()->empty()) {
    throw DmrError(DmrErrc::EmptyProgramName, "argv[0] is empty");
  }
  ctx.env = env;
  move_to(ctx, DmrEvent::Init,
          ctx.reconfig_count == 0 ? S::NoPendingReconfiguration
                                  : S::WaitForDataReceive);
}

CheckOutcome dmr_check(DmrContext& ctx, const Suggestion& suggestion,
                       ClusterState& cluster) {
  using K = CheckOutcome::Kind;
  require(ctx, DmrEvent::Check, {S::NoPendingReconfiguration, S::WaitForScheduler});

  if (ctx.state == S::WaitForScheduler) {
    const ResizeRequest& req = *ctx.pending_request;
    const JobStatusView status = cluster.job_status(*req.scheduler_job);
    if (status.status == JobStatus::Running) {
      ctx.jobs.push_back(*req.scheduler_job);
      ctx.active_request = req;
      ctx.pending_request.reset();
      move_to(ctx, DmrEvent::Check, S::WaitForApplication);
      return CheckOutcome::of(K::Granted);
    }
    const bool timed_out =
        req.timeout && cluster.clock() - req.submitted_at >= *req.timeout;
    if (timed_out || status.status == JobStatus::Terminated) {
      cluster.cancel_job(*req.scheduler_job);
      ctx.pending_request.reset();
      move_to(ctx, DmrEvent::Check, S::NoPendingReconfiguration);
      return CheckOutcome::of(K::Expired);
    }
    return CheckOutcome::of(K::StillPending);
  }

  if (ctx.inhibition_remaining > 0) {
    --ctx.inhibition_remaining;
    return CheckOutcome::no_action(NoActionReason::Inhibited);
  }
  if (suggestion.kind == Suggestion::Kind::ShouldStay) {
    return CheckOutcome::no_action(NoActionReason::StaySuggested);
  }

  const std::size_t current = ctx.allocation(cluster);
  const std::size_t delta = suggestion.delta_nodes;
  if (suggestion.kind == Suggestion::Kind::ShouldExpand) {
    if (delta == 0 || current + delta > ctx.max_nodes) {
      return CheckOutcome::no_action(NoActionReason::BadRequest);
    }
    JobId job;
    try {
      job = cluster.submit_job(delta);
    } catch (const ClusterError& e) {
      throw DmrError(DmrErrc::SchedulerError, e.what());
    }
    ctx.pending_request = ResizeRequest{ResizeKind::Grow, delta,
                                        ctx.request_timeout, job,
                                        cluster.clock()};
    move_to(ctx, DmrEvent::Check, S::WaitForScheduler);
    return CheckOutcome::of(K::RequestSubmitted);
  }

  if (delta == 0 || delta >= current || current - delta < ctx.min_nodes) {
    return CheckOutcome::no_action(NoActionReason::BadRequest);
  }
  ctx.active_request = ResizeRequest{ResizeKind::Shrink, delta, std::nullopt,
                                     std::nullopt, cluster.clock()};
  move_to(ctx, DmrEvent::Check, S::WaitForApplication);
  return CheckOutcome::of(K::Granted);
}

std::vector<VictimMark> select_shrink_victims(const DmrContext& ctx,
                                              const ClusterState& cluster,
                                              std::size_t delta_nodes) {
  std::vector<VictimMark> victims;
  std::size_t remaining = delta_nodes;
  for (auto it = ctx.jobs.rbegin(); it != ctx.jobs.rend() && remaining > 0;
       ++it) {
    const Job& j = cluster.job(*it);
    if (j.status != JobStatus::Running) continue;
    const std::size_t size = j.nodes.size();
    if (size <= remaining) {
      victims.push_back({*it, JobMark::kill()});
      remaining -= size;
    } else {
      victims.push_back({*it, JobMark::shrink(size - remaining)});
      remaining = 0;
    }
  }
  return victims;
}

ReconfigureReport dmr_reconfigure(DmrContext& ctx, ClusterState& cluster,
                                  ProcessSet& procs,
                                  std::span<const VictimMark> plan) {
  require(ctx, DmrEvent::Reconfigure,
          {S::WaitForDataReceive, S::WaitForApplication});
  ReconfigureReport report;

  if (ctx.state == S::WaitForApplication) {
    const ResizeRequest& req = *ctx.active_request;
    if (req.kind == ResizeKind::Grow) {
      const JobId job = *req.scheduler_job;
      const auto status = cluster.job_status(job);
      if (status.status != JobStatus::Running) {
        throw DmrError(DmrErrc::SpawnFailed,
                       "expander job " + std::to_string(job.value) +
                           " is not running");
      }
      report.processes_spawned =
          spawn_and_handshake(cluster, procs, job, status.nodes.size());
      report.nodes_added = status.nodes;
    } else {
      std::vector<VictimMark> victims(plan.begin(), plan.end());
      if (victims.empty()) {
        victims = select_shrink_victims(ctx, cluster, req.delta_nodes);
      }
      std::size_t released = 0;
      for (const auto& v : victims) {
        if (std::find(ctx.jobs.begin(), ctx.jobs.end(), v.job) == ctx.jobs.end()) {
          throw DmrError(DmrErrc::RemovalFailed,
                         "job " + std::to_string(v.job.value) +
                             " is not part of this execution");
        }
        try {
          cluster.validate_mark(v.job, v.mark);
        } catch (const ClusterError& e) {
          throw DmrError(DmrErrc::RemovalFailed, e.what());
        }
        const std::size_t size = cluster.job(v.job).nodes.size();
        released += v.mark.kind == MarkKind::Kill ? size : size - v.mark.shrink_target;
      }
      const std::size_t current = ctx.allocation(cluster);
      if (released >= current || current - released < ctx.min_nodes) {
        throw DmrError(DmrErrc::RemovalFailed,
                       "shrink plan leaves the allocation below the minimum");
      }
      for (const auto& v : victims) {
        cluster.mark(v.job, v.mark);
        (v.mark.kind == MarkKind::Kill ? report.jobs_killed : report.jobs_shrunk)
            .push_back(v.job);
      }
      report.marks_placed = std::move(victims);
    }
    move_to(ctx, DmrEvent::Reconfigure, S::WaitForDataSend);
    return report;
  }

  // WaitForDataReceive: slurm_remove_resources on marked jobs only.
  const RemovalReport removal = cluster.remove_marked_resources();
  for (const auto& r : removal.removals) {
    report.nodes_removed.insert(report.nodes_removed.end(), r.freed.begin(),
                                r.freed.end());
    (r.mark == MarkKind::Kill ? report.jobs_killed : report.jobs_shrunk)
        .push_back(r.job);
    auto retired = procs.retire_nodes(r.freed);
    report.processes_retired.insert(report.processes_retired.end(),
                                    retired.begin(), retired.end());
  }
  std::erase_if(ctx.jobs, [&](JobId id) {
    return id != ctx.job_handle &&
           cluster.job(id).status == JobStatus::Terminated;
  });
  if (ctx.removal_pending()) finish_cycle(ctx);
  move_to(ctx, DmrEvent::Reconfigure, S::NoPendingReconfiguration);
  return report;
}

void complete_data_phase(DmrContext& ctx, DataDirection direction) {
  if (direction == DataDirection::Send) {
    require(ctx, DmrEvent::CompleteDataPhase, {S::WaitForDataSend});
    if (ctx.removal_pending()) {
      move_to(ctx, DmrEvent::CompleteDataPhase, S::WaitForDataReceive);
      return;
    }
    finish_cycle(ctx);
    move_to(ctx, DmrEvent::CompleteDataPhase, S::NoPendingReconfiguration);
    return;
  }
  require(ctx, DmrEvent::CompleteDataPhase, {S::WaitForDataReceive});
  if (ctx.removal_pending()) {
    throw DmrError(DmrErrc::WrongState,
                   "marked resources must be removed with dmr_reconfigure");
  }
  move_to(ctx, DmrEvent::CompleteDataPhase, S::NoPendingReconfiguration);
}

FinalizeReport dmr_finalize(DmrContext& ctx) {
  require(ctx, DmrEvent::Finalize,
          {S::WaitForDataReceive, S::NoPendingReconfiguration,
           S::WaitForScheduler, S::WaitForApplication, S::WaitForDataSend});
  FinalizeReport report{ctx.state, ctx.state == S::WaitForApplication ||
                                       ctx.state == S::WaitForDataSend};
  ctx.pending_request.reset();
  move_to(ctx, DmrEvent::Finalize, S::Finalized);
  return report;
}

std::span<const TransitionRule> transition_table() { return kRules; }

std::vector<DmrEvent> allowed_events(MalleabilityState state) {
  std::vector<DmrEvent> events;
  for (DmrEvent e : kAllEvents) {
    const bool enabled = std::any_of(
        std::begin(kRules), std::end(kRules),
        [&](const TransitionRule& r) { return r.from == state && r.event == e; });
    if (enabled) events.push_back(e);
  }
  return events;
}

void export_transition_table(std::ostream& os) {
  for (const auto& r : kRules) {
    os << to_string(r.from) << " --" << event_name(r.event);
    if (!r.guard.empty()) os << " [" << r.guard << ']';
    os << "--> " << to_string(r.to) << '\n';
  }
}

}  // namespace dynrm
