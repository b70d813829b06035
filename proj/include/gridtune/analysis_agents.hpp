#pragma once

// Decision logic of the four analysis levels. Each step is a function over the
// agent's private state and its inputs; the actors in simulation.hpp only
// move messages in and out of these.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gridtune/grid_model.hpp"
#include "gridtune/monitoring.hpp"
#include "gridtune/params.hpp"
#include "gridtune/protocol.hpp"

namespace gridtune {

// ---------------------------------------------------------------------------
// Node-level agent

struct NaJobView {
  Job job;
  JobConfig config;
  JobStatus status = JobStatus::Running;
  std::optional<SimTime> last_tuned_at;
};

// What the NA observes of its node when it analyses a pull.
struct NaNodeView {
  Node node;                  // background_load is the current one
  SimTime now = 0.0;
  std::vector<NaJobView> jobs;  // jobs placed on the node

  int threads_on_node() const {
    int n = 0;
    for (const auto& j : jobs)
      if (j.status == JobStatus::Running || j.status == JobStatus::Failed) n += j.config.threads;
    return n;
  }
};

struct NaState {
  std::string agent_id;
  std::string node_id;
  std::string resource_id;
  AgentParams params;

  int saturated_windows = 0;
  SimTime last_heartbeat = 0.0;
  double last_cpu_usage = 0.0;
  bool node_fault_reported = false;

  struct JobMemory {
    bool limitation_reported = false;
    bool fault_reported = false;
    std::optional<JobConfig> hinted_config;  // config a tuning hint was last raised for
  };
  std::map<std::string, JobMemory> jobs;
};

namespace detail {

inline std::map<std::string, std::vector<double>> per_thread_work(std::span<const MetricSample> pulled) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& s : pulled) {
    if (s.kind != MetricKind::ThreadWork || s.thread < 0) continue;
    auto& v = out[s.job_id];
    if (v.size() <= static_cast<std::size_t>(s.thread)) v.resize(static_cast<std::size_t>(s.thread) + 1, 0.0);
    v[static_cast<std::size_t>(s.thread)] += s.value;
  }
  return out;
}

}  // namespace detail

// Rules, first match wins per job:
//   T1 more threads are free and the modelled gain of doubling >= gain_min
//   T2 Static scheduling with thread imbalance > imbalance_max
//   M1 cpu usage >= saturation_min for sustain_periods pull windows
//   F1 no heartbeat for heartbeat_timeout
// A matched rule whose episode was already reported stays silent. Returned
// findings carry no id; the caller assigns one.
inline std::vector<Finding> na_step(NaState& state, std::span<const MetricSample> pulled, const NaNodeView& view) {
  const auto& p = state.params;
  const SimTime now = view.now;
  const Node& node = view.node;

  for (const auto& s : pulled)
    if (s.kind == MetricKind::Heartbeat) state.last_heartbeat = std::max(state.last_heartbeat, s.at);

  const double usage = cpu_usage(pulled, p.pull_period, node.processors, now);
  state.last_cpu_usage = usage;
  if (usage >= p.saturation_min) {
    ++state.saturated_windows;
  } else {
    state.saturated_windows = 0;
    for (auto& [id, mem] : state.jobs) mem.limitation_reported = false;
  }
  const double since_heartbeat = now - state.last_heartbeat;
  const bool heartbeat_expired = since_heartbeat >= p.heartbeat_timeout;
  if (!heartbeat_expired) {
    state.node_fault_reported = false;
    for (auto& [id, mem] : state.jobs) mem.fault_reported = false;
  }

  const auto thread_work = detail::per_thread_work(pulled);
  const int free = free_processors(node, view.threads_on_node());

  auto make = [&](const NaJobView* jv, ProblemClass problem) {
    Finding f;
    f.at = now;
    f.source = state.agent_id;
    if (jv) f.job_id = jv->job.id;
    f.node_id = state.node_id;
    f.resource_id = state.resource_id;
    f.problem = problem;
    f.evidence["cpu_usage"] = usage;
    return f;
  };

  std::vector<Finding> out;
  for (const auto& jv : view.jobs) {
    if (jv.status != JobStatus::Running && jv.status != JobStatus::Failed) continue;
    auto& mem = state.jobs[jv.job.id];
    const bool running = jv.status == JobStatus::Running;
    const bool quiesced = jv.last_tuned_at && now - *jv.last_tuned_at < p.quiesce_window();
    const int threads = jv.config.threads;

    // T1
    if (running && !quiesced && node.background_load < 1.0) {
      int limit = std::min(threads + free, node.processors);
      if (jv.job.max_threads > 0) limit = std::min(limit, jv.job.max_threads);
      const int candidate = std::min(2 * threads, limit);
      if (candidate > threads) {
        JobConfig more = jv.config;
        more.threads = candidate;
        const double now_time = predicted_exec_time(jv.job, node, jv.config, node.background_load);
        const double more_time = predicted_exec_time(jv.job, node, more, node.background_load);
        const double gain = 1.0 - more_time / now_time;
        if (gain >= p.gain_min) {
          if (mem.hinted_config != jv.config) {
            Finding f = make(&jv, ProblemClass::LocallyTunable);
            f.hint = ActionHint::IncreaseThreads;
            f.thread_limit = limit;
            f.evidence["modeled_gain"] = gain;
            f.evidence["free_processors"] = free;
            out.push_back(std::move(f));
            mem.hinted_config = jv.config;
          }
          continue;
        }
      }
    }
    // T2
    if (running && !quiesced && jv.config.scheduling == Scheduling::Static && threads >= 2) {
      auto it = thread_work.find(jv.job.id);
      if (it != thread_work.end() && !it->second.empty()) {
        const double imbalance = load_imbalance(it->second);
        if (imbalance > p.imbalance_max) {
          if (mem.hinted_config != jv.config) {
            Finding f = make(&jv, ProblemClass::LocallyTunable);
            f.hint = ActionHint::ChangeScheduling;
            f.evidence["imbalance"] = imbalance;
            out.push_back(std::move(f));
            mem.hinted_config = jv.config;
          }
          continue;
        }
      }
    }
    // M1
    if (state.saturated_windows >= p.sustain_periods) {
      if (!mem.limitation_reported) {
        Finding f = make(&jv, ProblemClass::ResourceLimitation);
        f.evidence["saturated_windows"] = state.saturated_windows;
        out.push_back(std::move(f));
        mem.limitation_reported = true;
      }
      continue;
    }
    // F1
    if (heartbeat_expired) {
      if (!mem.fault_reported) {
        Finding f = make(&jv, ProblemClass::Fault);
        f.evidence["since_heartbeat"] = since_heartbeat;
        out.push_back(std::move(f));
        mem.fault_reported = true;
      }
      continue;
    }
  }

  const bool any_job = std::any_of(view.jobs.begin(), view.jobs.end(), [](const NaJobView& j) {
    return j.status == JobStatus::Running || j.status == JobStatus::Failed;
  });
  if (!any_job && heartbeat_expired && !state.node_fault_reported) {
    Finding f = make(nullptr, ProblemClass::Fault);
    f.evidence["since_heartbeat"] = since_heartbeat;
    out.push_back(std::move(f));
    state.node_fault_reported = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resource-level agent

struct RaState {
  std::string agent_id;
  Resource resource;
  AgentParams params;
  std::map<std::string, NodeStatus> latest;
  bool healthy = true;
  bool imbalance_reported = false;
};

struct RaResult {
  ResourceStatus status;
  std::optional<Finding> overload;
};

inline double node_load(const NodeStatus& n) {
  int threads = 0;
  for (const auto& j : n.jobs) threads += j.threads;
  const double busy = std::min(threads, n.processors) + n.background_load * n.processors;
  return std::clamp(busy / std::max(1, n.processors), 0.0, 1.0);
}

// Folds node reports into the resource view. Clusters additionally check the
// spread of per-node loads; SMPs and workstations pass the node report through.
inline RaResult ra_aggregate(RaState& state, std::span<const NodeStatus> node_statuses, SimTime now) {
  for (const auto& ns : node_statuses)
    if (!state.resource.find_node(ns.node_id))
      throw Error(Errc::ForeignNode, "node '" + ns.node_id + "' is not part of '" + state.resource.id + "'");
  for (const auto& ns : node_statuses) state.latest[ns.node_id] = ns;

  ResourceStatus rs;
  rs.resource_id = state.resource.id;
  rs.reported_at = now;
  rs.healthy = state.healthy;
  rs.total_processors = state.resource.total_processors();
  rs.last_heartbeat = std::numeric_limits<double>::infinity();

  Resource view = state.resource;
  std::vector<JobConfig> running;
  for (auto& node : view.nodes) {
    auto it = state.latest.find(node.id);
    if (it == state.latest.end()) {
      NodeStatus blank;
      blank.node_id = node.id;
      blank.processors = node.processors;
      blank.speed = node.speed;
      blank.background_load = node.background_load;
      blank.memory = node.memory;
      blank.free_processors = free_processors(node, 0);
      rs.nodes.push_back(blank);
      rs.last_heartbeat = std::min(rs.last_heartbeat, 0.0);
    } else {
      rs.nodes.push_back(it->second);
      node.background_load = it->second.background_load;
      rs.last_heartbeat = std::min(rs.last_heartbeat, it->second.last_heartbeat);
    }
    const NodeStatus& ns = rs.nodes.back();
    rs.free_processors += ns.free_processors;
    rs.memory = std::max(rs.memory, ns.memory);
    for (const auto& j : ns.jobs) {
      running.push_back(JobConfig{view.id, node.id, j.threads, Scheduling::Static});
      rs.per_job.push_back(JobProgress{j.job_id, j.progress, j.predicted_finish});
    }
  }
  rs.load = effective_load(view, running);

  RaResult out{rs, std::nullopt};
  if (state.resource.kind != ResourceKind::Cluster || rs.nodes.size() < 2) return out;

  std::vector<double> loads;
  for (const auto& ns : rs.nodes) loads.push_back(node_load(ns));
  const double imbalance = load_imbalance(loads);
  if (imbalance > state.params.imbalance_max) {
    if (!state.imbalance_reported) {
      Finding f;
      f.at = now;
      f.source = state.agent_id;
      f.node_id = state.resource.nodes.front().id;
      f.resource_id = state.resource.id;
      f.problem = ProblemClass::Overload;
      f.evidence["imbalance"] = imbalance;
      out.overload = std::move(f);
      state.imbalance_reported = true;
    }
  } else {
    state.imbalance_reported = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid-site-level agent

struct GsaState {
  std::string agent_id;
  std::string site_id;
  std::set<std::string> resource_ids;
  AgentParams params;
  std::vector<std::string> subscribers;  // JobControllers receiving proactive warnings
  std::map<std::string, ResourceStatus> latest;
  std::set<std::string> faults;
  std::set<std::string> overloaded;
  SimTime now = 0.0;
};

struct GsaResult {
  SiteSummary summary;
  std::vector<Finding> new_problems;  // first sighting of each fault / overload
  std::vector<Warning> proactive;     // one Critical warning per new problem per subscriber
};

inline bool gsa_is_faulty(const ResourceStatus& s, SimTime now, double heartbeat_timeout) {
  return !s.healthy || now - s.last_heartbeat >= heartbeat_timeout;
}

inline GsaResult gsa_summarize(GsaState& state, std::span<const ResourceStatus> statuses, SimTime now) {
  for (const auto& s : statuses)
    if (!state.resource_ids.count(s.resource_id))
      throw Error(Errc::ForeignResource, "resource '" + s.resource_id + "' is not in site '" + state.site_id + "'");
  for (const auto& s : statuses) state.latest[s.resource_id] = s;
  state.now = std::max(state.now, now);

  GsaResult out;
  out.summary.site_id = state.site_id;
  std::set<std::string> faults, overloaded;
  for (const auto& [id, s] : state.latest) {
    out.summary.statuses.push_back(s);
    if (gsa_is_faulty(s, now, state.params.heartbeat_timeout)) faults.insert(id);
    if (s.load >= state.params.overload_min) overloaded.insert(id);
  }
  out.summary.faults.assign(faults.begin(), faults.end());
  out.summary.overloaded.assign(overloaded.begin(), overloaded.end());

  auto raise = [&](const std::string& resource_id, ProblemClass problem) {
    const auto& s = state.latest.at(resource_id);
    Finding f;
    f.at = now;
    f.source = state.agent_id;
    f.node_id = s.nodes.empty() ? std::string() : s.nodes.front().node_id;
    f.resource_id = resource_id;
    f.problem = problem;
    f.evidence["load"] = s.load;
    f.evidence["since_heartbeat"] = now - s.last_heartbeat;
    for (const auto& sub : state.subscribers) out.proactive.push_back(Warning{"", f, Severity::Critical, sub});
    out.new_problems.push_back(std::move(f));
  };
  for (const auto& id : faults)
    if (!state.faults.count(id)) raise(id, ProblemClass::Fault);
  for (const auto& id : overloaded)
    if (!state.overloaded.count(id)) raise(id, ProblemClass::Overload);
  state.faults = std::move(faults);
  state.overloaded = std::move(overloaded);
  return out;
}

// Latest statuses of healthy resources meeting the requirement, by resource id.
inline std::vector<ResourceStatus> gsa_query_load(const GsaState& state, const Requirement& req) {
  if (req.min_processors < 1 || req.memory_need < 0.0)
    throw Error(Errc::ValidationError, "requirement fields must be positive");
  std::vector<ResourceStatus> out;
  for (const auto& [id, s] : state.latest) {
    if (gsa_is_faulty(s, state.now, state.params.heartbeat_timeout)) continue;
    if (s.free_processors < req.min_processors) continue;
    if (s.memory < req.memory_need) continue;
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid-level agent

struct RegistryEntry {
  SimTime received_at = 0.0;
  std::string from;
  std::variant<Finding, AuditRecord> record;
};

struct GaState {
  std::string agent_id = "ga";
  std::vector<RegistryEntry> registry;
};

inline void ga_register(GaState& state, std::variant<Finding, AuditRecord> record, const std::string& from,
                        SimTime at) {
  state.registry.push_back(RegistryEntry{at, from, std::move(record)});
}

struct ResourceTally {
  std::string resource_id;
  int faults = 0;
  int overloads = 0;
  int limitations = 0;

  bool operator==(const ResourceTally&) const = default;
};

struct AuditReport {
  std::vector<AuditRecord> promises;
  std::vector<ResourceTally> per_resource;
  int findings = 0;
  int audit_records = 0;
  int kept = 0;
  int broken = 0;
};

inline AuditReport ga_audit(const GaState& state) {
  AuditReport report;
  std::map<std::string, ResourceTally> tallies;
  for (const auto& entry : state.registry) {
    if (const auto* f = std::get_if<Finding>(&entry.record)) {
      ++report.findings;
      auto& t = tallies[f->resource_id];
      t.resource_id = f->resource_id;
      if (f->problem == ProblemClass::Fault) ++t.faults;
      if (f->problem == ProblemClass::Overload) ++t.overloads;
      if (f->problem == ProblemClass::ResourceLimitation) ++t.limitations;
    } else {
      const auto& a = std::get<AuditRecord>(entry.record);
      ++report.audit_records;
      (a.kept ? report.kept : report.broken) += 1;
      report.promises.push_back(a);
    }
  }
  for (auto& [id, t] : tallies) report.per_resource.push_back(t);
  return report;
}

}  // namespace gridtune
