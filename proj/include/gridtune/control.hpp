#pragma once

// Corrective side of the framework: the Tuning Agent's local actions and the
// JEM / JobController decisions leading to a migration plan. Execution of the
// plan lives in the simulation world.

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <variant>

#include "gridtune/grid_model.hpp"
#include "gridtune/params.hpp"
#include "gridtune/protocol.hpp"

namespace gridtune {

inline JobConfig apply_tuning(const JobState& state, const JobConfig& config, const TuningAction& action,
                              const Node& node, bool strict) {
  if (state.status != JobStatus::Running)
    throw Error(Errc::JobNotRunning, "job '" + action.job_id + "' is " + std::string(to_string(state.status)));
  JobConfig next = config;
  if (action.kind == TuningAction::Kind::SetThreads) {
    if (action.threads < 1) throw Error(Errc::ValidationError, "SetThreads needs n >= 1");
    if (action.threads > node.processors && strict)
      throw Error(Errc::NodeCapacityExceeded, std::to_string(action.threads) + " threads on " +
                                                  std::to_string(node.processors) + " processors");
    next.threads = std::min(action.threads, node.processors);
  } else {
    next.scheduling = action.scheduling;
  }
  return next;
}

// Doubling policy for IncreaseThreads (capped by the node and the limit the NA
// computed), Dynamic scheduling for ChangeScheduling.
inline TuningAction select_tuning_action(const Finding& finding, const Node& node, const JobConfig& config) {
  if (finding.problem != ProblemClass::LocallyTunable)
    throw Error(Errc::NotTunable, std::string(to_string(finding.problem)) + " is not locally tunable");
  TuningAction action;
  action.job_id = finding.job_id.value_or("");
  action.issued_at = finding.at;
  switch (finding.hint) {
    case ActionHint::IncreaseThreads: {
      int limit = node.processors;
      if (finding.thread_limit > 0) limit = std::min(limit, finding.thread_limit);
      const int next = std::min(2 * config.threads, limit);
      if (next <= config.threads)
        throw Error(Errc::NotTunable, "job already at " + std::to_string(config.threads) + " threads");
      action.kind = TuningAction::Kind::SetThreads;
      action.threads = next;
      return action;
    }
    case ActionHint::ChangeScheduling:
      action.kind = TuningAction::Kind::SetScheduling;
      action.scheduling = Scheduling::Dynamic;
      return action;
    case ActionHint::None: break;
  }
  throw Error(Errc::NotTunable, "finding carries no action hint");
}

// ---------------------------------------------------------------------------
// JobExecutionManager

struct JemState {
  std::string agent_id;
  AgentParams params;
  std::map<std::string, Job> jobs;

  struct Memory {
    std::optional<SimTime> last_consult;
    std::optional<SimTime> last_migration;
    bool migrating = false;
  };
  std::map<std::string, Memory> memory;
};

// ResourceLimitation / Fault warnings of severity >= Warn become a consult
// request, unless one was issued (or a migration started) within the cooldown
// window. The request's id and snapshot are left to the caller.
inline std::optional<ConsultRequest> jem_on_warning(JemState& state, const Warning& warning, SimTime now) {
  const auto& job_id = warning.finding.job_id;
  if (!job_id || !state.jobs.count(*job_id))
    throw Error(Errc::UnmanagedJob, "'" + job_id.value_or("<none>") + "' is not managed by " + state.agent_id);
  const auto problem = warning.finding.problem;
  if (problem != ProblemClass::ResourceLimitation && problem != ProblemClass::Fault) return std::nullopt;
  if (warning.severity < Severity::Warn) return std::nullopt;

  auto& mem = state.memory[*job_id];
  if (mem.migrating) return std::nullopt;
  const double cooldown = state.params.cooldown_window;
  if (mem.last_consult && now - *mem.last_consult < cooldown) return std::nullopt;
  if (mem.last_migration && now - *mem.last_migration < cooldown) return std::nullopt;
  mem.last_consult = now;

  const Job& job = state.jobs.at(*job_id);
  ConsultRequest req;
  req.job_id = *job_id;
  req.jem_id = state.agent_id;
  req.requirement = Requirement{std::max(1, job.min_processors), job.memory_need};
  req.warning = warning;
  return req;
}

// ---------------------------------------------------------------------------
// JobController

inline bool selectable(const ResourceStatus& s, const Requirement& req, const std::string& current) {
  return s.resource_id != current && s.healthy && s.free_processors >= req.min_processors &&
         s.memory >= req.memory_need;
}

// Best candidate by (lowest load, most free processors, smallest id).
inline std::optional<std::string> select_resource(std::span<const ResourceStatus> candidates,
                                                  const Requirement& req, const std::string& current) {
  const ResourceStatus* best = nullptr;
  for (const auto& s : candidates) {
    if (!selectable(s, req, current)) continue;
    if (!best || std::make_tuple(s.load, -s.free_processors, s.resource_id) <
                     std::make_tuple(best->load, -best->free_processors, best->resource_id))
      best = &s;
  }
  if (!best) return std::nullopt;
  return best->resource_id;
}

inline double transfer_overhead(const Job& job, const AgentParams& params) {
  return params.transfer_base + params.transfer_per_memory * job.memory_need;
}

inline Node node_from_status(const NodeStatus& s) {
  return Node{s.node_id, s.processors, s.speed, s.background_load, s.memory};
}

// Stay-put remaining time at the source; infinite when the source cannot run.
inline double source_remaining(const JobSnapshot& snap) {
  if (!snap.source_healthy || snap.source_background >= 1.0) return std::numeric_limits<double>::infinity();
  JobState st;
  st.progress = snap.progress;
  return remaining_time(snap.job, st, snap.source_node, snap.config, snap.source_background);
}

// Migrate iff transfer + remaining-at-target < (1 - min_gain) * remaining-at-source.
inline std::variant<MigrationPlan, Stay> plan_migration(const JobSnapshot& snap, const ResourceStatus& target,
                                                        const AgentParams& params, SimTime now,
                                                        const std::string& consult_id = {}) {
  if (snap.progress >= 1.0 || snap.status == JobStatus::Done) return Stay{"already done"};
  if (snap.status != JobStatus::Running && snap.status != JobStatus::Failed) return Stay{"job not running"};
  if (target.resource_id == snap.config.resource_id) return Stay{"target is the current resource"};
  if (snap.last_tuned_at && now - *snap.last_tuned_at < params.quiesce_window()) return Stay{"tuning quiesce"};

  const NodeStatus* node = nullptr;
  for (const auto& n : target.nodes)
    if (!node || n.free_processors > node->free_processors) node = &n;
  if (!node || node->free_processors < std::max(1, snap.job.min_processors) || node->background_load >= 1.0)
    return Stay{"no node with enough free processors"};

  int cap = std::min(node->free_processors, node->processors);
  if (snap.job.max_threads > 0) cap = std::min(cap, snap.job.max_threads);
  const Node target_node = node_from_status(*node);
  const int threads = best_thread_count(snap.job, target_node, snap.config.scheduling, node->background_load, cap);

  JobState resumed;
  resumed.progress = params.restart_migration ? 0.0 : snap.progress;
  const JobConfig target_cfg{target.resource_id, node->node_id, threads, snap.config.scheduling};
  const double at_target = remaining_time(snap.job, resumed, target_node, target_cfg, node->background_load);
  const double transfer = transfer_overhead(snap.job, params);
  const double at_source = source_remaining(snap);
  const double total = transfer + at_target;
  if (!(total < (1.0 - params.min_gain) * at_source)) return Stay{"insufficient gain"};

  MigrationPlan plan;
  plan.consult_id = consult_id;
  plan.job_id = snap.job.id;
  plan.source_resource = snap.config.resource_id;
  plan.source_node = snap.config.node_id;
  plan.target_resource = target.resource_id;
  plan.target_node = node->node_id;
  plan.threads = threads;
  plan.checkpoint_progress = snap.progress;
  plan.transfer_overhead = transfer;
  plan.decided_at = now;
  plan.source_remaining = at_source;
  plan.target_remaining = at_target;
  plan.predicted_gain = at_source - total;
  return plan;
}

}  // namespace gridtune
