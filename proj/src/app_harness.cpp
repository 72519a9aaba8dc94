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

#include "dynrm/app_harness.hpp"

#include <algorithm>
#include <ostream>

#include "dynrm/checkpoint.hpp"
#include "dynrm/policy.hpp"

namespace dynrm {

namespace {

// A scenario transition reduced to what one DMR reconfiguration can do.
struct StepPlan {
  enum class Kind { Stay, Grow, Shrink } kind = Kind::Stay;
  std::size_t delta = 0;
  std::uint32_t new_job = 0;  // Grow
  Delta actions;
};

std::vector<StepPlan> plan_scenario(const Scenario& scenario,
                                    std::size_t node_count) {
  for (const auto& step : scenario.steps) {
    if (total_processes(step) > node_count) {
      throw HarnessError(HarnessErrc::PlanInfeasible,
                         "R" + std::to_string(step.index) + " needs " +
                             std::to_string(total_processes(step)) +
                             " nodes, cluster has " +
                             std::to_string(node_count));
    }
  }
  std::vector<StepPlan> plans;
  const auto deltas = compute_deltas(scenario);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    StepPlan p;
    p.actions = deltas[i];
    std::size_t new_jobs = 0, reductions = 0;
    for (const auto& [job, action] : deltas[i]) {
      switch (action.kind) {
        case JobAction::Kind::NewJob:
          ++new_jobs;
          p.new_job = job;
          p.delta = action.count;
          break;
        case JobAction::Kind::Kill:
          reductions += scenario.steps[i].find(job)->procs.size();
          break;
        case JobAction::Kind::ShrinkTo:
          reductions += scenario.steps[i].find(job)->procs.size() - action.count;
          break;
        case JobAction::Kind::Grow:
        case JobAction::Kind::Unchanged:
          break;
      }
    }
    if (new_jobs > 1 || (new_jobs == 1 && reductions > 0)) {
      throw HarnessError(HarnessErrc::PlanInfeasible,
                         "R" + std::to_string(i + 1) +
                             " mixes several resize actions; one "
                             "reconfiguration either adds one job or shrinks");
    }
    if (new_jobs == 1) {
      p.kind = StepPlan::Kind::Grow;
    } else if (reductions > 0) {
      p.kind = StepPlan::Kind::Shrink;
      p.delta = reductions;
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

class Driver {
 public:
  Driver(ClusterState& cluster, const RunOptions& options)
      : cluster_(cluster), options_(options) {}

  ExecutionTrace run(const Plan& plan) {
    if (options_.iterations == 0) {
      throw HarnessError(HarnessErrc::PlanInfeasible,
                         "at least one iteration is required");
    }
    if (const auto* scenario = std::get_if<Scenario>(&plan)) {
      scenario_ = scenario;
      steps_ = plan_scenario(*scenario, cluster_.node_count());
    } else {
      policy_ = &std::get<PolicyPlan>(plan);
      if (!policy_->efficiency) {
        throw HarnessError(HarnessErrc::PlanInfeasible,
                           "policy plan has no efficiency model");
      }
    }
    launch();
    for (std::size_t it = 0; it < options_.iterations; ++it) iteration();

    const auto fin = dmr_finalize(ctx_);
    sync_history();
    trace_.finalize_wasted = fin.wasted_resize;
    trace_.final_state = ctx_.state;
    trace_.plan_completed = policy_ != nullptr || next_step_ == steps_.size();
    trace_.handshakes = procs_.handshakes();
    return std::move(trace_);
  }

 private:
  void launch() {
    std::vector<JobId> launched;
    if (scenario_) {
      for (const auto& l : scenario_->steps.front().layouts) {
        const JobId id = cluster_.launch_job(l.procs.size());
        trace_.scenario_jobs[l.job] = id;
        launched.push_back(id);
      }
    } else {
      launched.push_back(cluster_.launch_job(policy_->initial_nodes));
    }
    const std::size_t max_nodes =
        options_.max_nodes.value_or(cluster_.node_count());
    ctx_ = DmrContext::make(launched.front(), options_.min_nodes, max_nodes);
    ctx_.jobs = launched;
    ctx_.inhibition_remaining = options_.inhibition;
    ctx_.inhibition_window = options_.inhibition_window;
    ctx_.request_timeout = options_.request_timeout;
    for (JobId id : launched) procs_.seed(cluster_, id);

    dmr_init(ctx_, EnvSnapshot::valid(std::to_string(launched.front().value)));
    sync_history();
    record_generation();
  }

  void iteration() {
    cluster_.tick(options_.iteration_time);
    if (ctx_.state != MalleabilityState::NoPendingReconfiguration &&
        ctx_.state != MalleabilityState::WaitForScheduler) {
      return;
    }

    Suggestion suggestion = Suggestion::stay();
    const StepPlan* step = nullptr;
    if (ctx_.state == MalleabilityState::NoPendingReconfiguration) {
      if (scenario_) {
        if (next_step_ < steps_.size()) {
          step = &steps_[next_step_];
          if (step->kind == StepPlan::Kind::Grow) {
            suggestion = Suggestion::expand(step->delta);
          } else if (step->kind == StepPlan::Kind::Shrink) {
            suggestion = Suggestion::shrink(step->delta);
          }
        }
      } else {
        const double total = static_cast<double>(options_.iteration_time.count()) / 1000.0;
        const double eff =
            std::clamp(policy_->efficiency(procs_.size()), 0.0, 1.0);
        suggestion = evaluate_policy(PolicyMetrics{eff * total, total},
                                     policy_->target, policy_->band);
      }
    }

    trace_.suggestions.push_back(suggestion);
    const CheckOutcome outcome = dmr_check(ctx_, suggestion, cluster_);
    trace_.outcomes.push_back(outcome);
    sync_history();

    if (outcome.kind == CheckOutcome::Kind::NoAction) {
      if (step && outcome.reason == NoActionReason::StaySuggested) {
        ++next_step_;  // an all-unchanged step is consumed as is
      } else if (step && outcome.reason == NoActionReason::BadRequest) {
        throw HarnessError(HarnessErrc::PlanInfeasible,
                           "R" + std::to_string(next_step_ + 1) +
                               " rejected by the library constraints");
      }
    }
    if (outcome.kind == CheckOutcome::Kind::Granted) reconfigure();
    check_invariants();
  }

  void reconfigure() {
    const std::size_t cycle = ++trace_.reconfigurations;
    const ResizeRequest request = *ctx_.active_request;
    LatencyRecord latency;
    latency.kind = request.kind;
    latency.resources_secured_at = cluster_.clock();
    latency.wall_resources_secured_at = WallClock::now();

    std::optional<JobId> granted_job = request.scheduler_job;
    emit(kStageGranted, granted_job,
         granted_job ? cluster_.job_status(*granted_job).nodes
                     : std::vector<NodeId>{},
         cycle);

    std::vector<VictimMark> marks;
    if (scenario_ && request.kind == ResizeKind::Shrink) {
      for (const auto& [job, action] : steps_[next_step_].actions) {
        const JobId id = trace_.scenario_jobs.at(job);
        if (action.kind == JobAction::Kind::Kill) {
          marks.push_back({id, JobMark::kill()});
        } else if (action.kind == JobAction::Kind::ShrinkTo) {
          marks.push_back({id, JobMark::shrink(action.count)});
        }
      }
    }
    const std::size_t handshakes_before = procs_.handshakes().size();
    dmr_reconfigure(ctx_, cluster_, procs_, marks);
    sync_history();
    for (std::size_t i = handshakes_before; i < procs_.handshakes().size(); ++i) {
      const auto& h = procs_.handshakes()[i];
      emit(kStageSpawned, h.job, {h.node}, cycle);
    }
    if (scenario_ && request.kind == ResizeKind::Grow) {
      trace_.scenario_jobs[steps_[next_step_].new_job] = *granted_job;
    }

    // Sources write the checkpoint while in WaitForDataSend.
    const auto payload = CheckpointPayload::make(
        ctx_.reconfig_count + 1,
        seeded_bytes(options_.payload_bytes, options_.seed + cycle));
    const auto stored = store(payload, cycle);
    emit(kStageDataSend, std::nullopt, {}, cycle);
    complete_data_phase(ctx_, DataDirection::Send);
    sync_history();

    if (request.kind == ResizeKind::Grow) {
      // Joiners start fresh with a non-zero count and land in WaitForDataReceive.
      DmrContext joiner = DmrContext::make(*granted_job, ctx_.min_nodes,
                                           ctx_.max_nodes);
      joiner.reconfig_count = ctx_.reconfig_count;
      dmr_init(joiner, EnvSnapshot::valid(std::to_string(granted_job->value)));
      verify_loaded(load(stored), payload);
      emit(kStageDataReceive, granted_job, {}, cycle);
      complete_data_phase(joiner, DataDirection::Receive);
    } else {
      verify_loaded(load(stored), payload);
      emit(kStageDataReceive, std::nullopt, {}, cycle);
      const auto report = dmr_reconfigure(ctx_, cluster_, procs_);
      sync_history();
      emit("removed", std::nullopt, report.nodes_removed, cycle);
    }

    procs_.set_generation(ctx_.reconfig_count);
    emit(kStageResume, std::nullopt, {}, cycle);
    latency.resumed_at = cluster_.clock();
    latency.wall_resumed_at = WallClock::now();
    trace_.latencies.push_back(latency);
    record_generation();
    if (scenario_) ++next_step_;
  }

  std::variant<std::filesystem::path, std::vector<std::byte>> store(
      const CheckpointPayload& payload, std::size_t cycle) {
    if (options_.checkpoint_dir.empty()) return encode_checkpoint(payload);
    auto path = options_.checkpoint_dir /
                ("dmr_ckpt_" + std::to_string(cycle) + ".bin");
    write_checkpoint(path, payload);
    return path;
  }

  CheckpointPayload load(
      const std::variant<std::filesystem::path, std::vector<std::byte>>& where) {
    if (const auto* path = std::get_if<std::filesystem::path>(&where)) {
      auto p = read_checkpoint(*path);
      std::filesystem::remove(*path);
      return p;
    }
    return decode_checkpoint(std::get<std::vector<std::byte>>(where));
  }

  static void verify_loaded(const CheckpointPayload& got,
                            const CheckpointPayload& want) {
    if (!(got == want)) {
      throw HarnessError(HarnessErrc::DataMismatch,
                         "redistributed data differs from what was sent");
    }
  }

  void emit(std::string_view kind, std::optional<JobId> job,
            std::vector<NodeId> nodes, std::size_t cycle) {
    trace_.events.push_back(
        TraceEvent{cluster_.clock(), std::string(kind), job, std::move(nodes), cycle});
  }

  void sync_history() {
    for (; seen_history_ < ctx_.history.size(); ++seen_history_) {
      const auto& t = ctx_.history[seen_history_];
      emit("state:" + std::string(state_letter(t.from)) + ">" +
               std::string(state_letter(t.to)),
           std::nullopt, {}, trace_.reconfigurations);
    }
  }

  void record_generation() {
    GenerationRecord g;
    g.generation = procs_.generation();
    g.processes = procs_.size();
    for (const auto& m : procs_.members()) ++g.procs_per_job[m.job];
    for (JobId id : ctx_.jobs) {
      const Job& j = cluster_.job(id);
      if (j.status == JobStatus::Running) g.nodes_per_job[id] = j.nodes.size();
    }
    trace_.generations.push_back(std::move(g));
  }

  void check_invariants() {
    if (!options_.assert_invariants) return;
    if (auto violation = verify_invariants(cluster_, ctx_, procs_)) {
      throw HarnessError(HarnessErrc::InvariantViolation, *violation);
    }
  }

  ClusterState& cluster_;
  const RunOptions& options_;
  const Scenario* scenario_ = nullptr;
  const PolicyPlan* policy_ = nullptr;
  std::vector<StepPlan> steps_;
  std::size_t next_step_ = 0;
  DmrContext ctx_;
  ProcessSet procs_;
  ExecutionTrace trace_;
  std::size_t seen_history_ = 0;
};

std::optional<std::size_t> first_index(const std::vector<TraceEvent>& events,
                                       std::size_t cycle, std::string_view kind) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].cycle == cycle && events[i].kind == kind) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> last_index(const std::vector<TraceEvent>& events,
                                      std::size_t cycle, std::string_view kind) {
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].cycle == cycle && events[i].kind == kind) found = i;
  }
  return found;
}

}  // namespace

HarnessError::HarnessError(HarnessErrc code, const std::string& what)
    : std::runtime_error(what), code_(code) {}

std::vector<std::size_t> ExecutionTrace::process_counts() const {
  std::vector<std::size_t> counts;
  for (const auto& g : generations) counts.push_back(g.processes);
  return counts;
}

ExecutionTrace run_app(const Plan& plan, ClusterState& cluster,
                       const RunOptions& options) {
  return Driver(cluster, options).run(plan);
}

std::optional<std::string> verify_invariants(const ClusterState& cluster,
                                             const DmrContext& ctx,
                                             const ProcessSet& procs) {
  if (auto v = cluster.find_violation()) return v;
  if (procs.generation() != ctx.reconfig_count) {
    return "process-set generation " + std::to_string(procs.generation()) +
           " != reconfig_count " + std::to_string(ctx.reconfig_count);
  }
  if (ctx.pending_request.has_value() !=
      (ctx.state == MalleabilityState::WaitForScheduler)) {
    return "pending request present outside WaitForScheduler";
  }
  for (const auto& m : procs.members()) {
    const Job& j = cluster.job(m.job);
    if (j.status != JobStatus::Running || !j.nodes.contains(m.node)) {
      return "process " + std::to_string(m.pid.value) +
             " sits on a node its job does not hold";
    }
  }
  for (JobId id : ctx.jobs) {
    const Job& j = cluster.job(id);
    if (procs.count_in(id) > j.nodes.size()) {
      return "job " + std::to_string(id.value) + " hosts more processes than nodes";
    }
  }
  const std::size_t alloc = ctx.allocation(cluster);
  if (alloc < ctx.min_nodes || alloc > ctx.max_nodes) {
    return "allocation " + std::to_string(alloc) + " outside [" +
           std::to_string(ctx.min_nodes) + ", " + std::to_string(ctx.max_nodes) + "]";
  }
  if (ctx.state == MalleabilityState::NoPendingReconfiguration ||
      ctx.state == MalleabilityState::WaitForScheduler) {
    if (procs.size() != alloc) {
      return "process count " + std::to_string(procs.size()) +
             " != allocated nodes " + std::to_string(alloc);
    }
  }
  return std::nullopt;
}

std::optional<OrderingViolation> ordered_redistribution(
    const ExecutionTrace& trace) {
  static constexpr std::string_view kChain[] = {
      kStageGranted, kStageSpawned, kStageDataSend, kStageDataReceive,
      kStageResume};
  std::size_t max_cycle = 0;
  for (const auto& e : trace.events) max_cycle = std::max(max_cycle, e.cycle);

  for (std::size_t cycle = 1; cycle <= max_cycle; ++cycle) {
    std::optional<std::size_t> prev_last;
    std::string_view prev_stage;
    for (std::string_view stage : kChain) {
      const auto first = first_index(trace.events, cycle, stage);
      if (!first) {
        if (stage == kStageSpawned) continue;
        return OrderingViolation{cycle, std::string(stage), "(missing)"};
      }
      if (prev_last && *first < *prev_last) {
        return OrderingViolation{cycle, std::string(prev_stage),
                                 std::string(stage)};
      }
      prev_last = last_index(trace.events, cycle, stage);
      prev_stage = stage;
    }
  }
  return std::nullopt;
}

std::vector<std::chrono::nanoseconds> reconfiguration_latency(
    const ExecutionTrace& trace) {
  std::vector<std::chrono::nanoseconds> out;
  for (const auto& r : trace.latencies) {
    if (!r.wall_resumed_at) {
      throw HarnessError(HarnessErrc::IncompleteTrace,
                         "reconfiguration never resumed");
    }
    out.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(
        *r.wall_resumed_at - r.wall_resources_secured_at));
  }
  return out;
}

void export_trace(std::ostream& os, const ExecutionTrace& trace) {
  for (const auto& e : trace.events) {
    os << format_event(ClusterEvent{e.time, e.kind, e.job, e.nodes}) << '\n';
  }
}

}  // namespace dynrm
