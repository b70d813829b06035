#pragma once

// Static grid topology (grid -> sites -> resources -> nodes) and the analytic
// job performance model used by the agents to predict tuning and migration
// effects.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridtune/error.hpp"

namespace gridtune {

using SimTime = double;

enum class ResourceKind { Cluster, SMP, Workstation };
enum class Scheduling { Static, Dynamic };
enum class JobStatus { Pending, Running, Migrating, Done, Failed };

inline std::string_view to_string(ResourceKind k) {
  switch (k) {
    case ResourceKind::Cluster: return "Cluster";
    case ResourceKind::SMP: return "SMP";
    case ResourceKind::Workstation: return "Workstation";
  }
  return "?";
}

inline std::string_view to_string(Scheduling s) {
  return s == Scheduling::Static ? "Static" : "Dynamic";
}

inline std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Pending: return "Pending";
    case JobStatus::Running: return "Running";
    case JobStatus::Migrating: return "Migrating";
    case JobStatus::Done: return "Done";
    case JobStatus::Failed: return "Failed";
  }
  return "?";
}

struct Node {
  std::string id;
  int processors = 1;
  double speed = 1.0;            // work-units per second per processor
  double background_load = 0.0;  // fraction of the node consumed by foreign load
  double memory = 1e9;           // abstract units

  bool operator==(const Node&) const = default;
};

struct Resource {
  std::string id;
  ResourceKind kind = ResourceKind::Workstation;
  std::vector<Node> nodes;
  bool healthy = true;

  int total_processors() const {
    int n = 0;
    for (const auto& node : nodes) n += node.processors;
    return n;
  }

  const Node* find_node(std::string_view node_id) const {
    for (const auto& node : nodes)
      if (node.id == node_id) return &node;
    return nullptr;
  }

  Node* find_node(std::string_view node_id) {
    for (auto& node : nodes)
      if (node.id == node_id) return &node;
    return nullptr;
  }

  bool operator==(const Resource&) const = default;
};

struct Site {
  std::string id;
  std::vector<Resource> resources;

  bool operator==(const Site&) const = default;
};

struct Grid {
  std::string id;
  std::vector<Site> sites;

  const Resource* find_resource(std::string_view resource_id) const {
    for (const auto& site : sites)
      for (const auto& r : site.resources)
        if (r.id == resource_id) return &r;
    return nullptr;
  }

  Resource* find_resource(std::string_view resource_id) {
    for (auto& site : sites)
      for (auto& r : site.resources)
        if (r.id == resource_id) return &r;
    return nullptr;
  }

  const Site* site_of(std::string_view resource_id) const {
    for (const auto& site : sites)
      for (const auto& r : site.resources)
        if (r.id == resource_id) return &site;
    return nullptr;
  }

  // Resource owning the node, or nullptr.
  const Resource* resource_of_node(std::string_view node_id) const {
    for (const auto& site : sites)
      for (const auto& r : site.resources)
        if (r.find_node(node_id)) return &r;
    return nullptr;
  }

  bool operator==(const Grid&) const = default;
};

// Piecewise-constant background load: from `at` onwards the node carries `load`.
struct LoadStep {
  SimTime at = 0.0;
  double load = 0.0;

  bool operator==(const LoadStep&) const = default;
};

struct NodeSpec {
  std::string id;
  int processors = 1;
  double speed = 1.0;
  double background_load = 0.0;
  double memory = 1e9;
  std::vector<LoadStep> background_schedule;
  double noise = 0.0;  // amplitude of uniform background fluctuation per sample period

  bool operator==(const NodeSpec&) const = default;
};

struct ResourceSpec {
  std::string id;
  ResourceKind kind = ResourceKind::Workstation;
  bool healthy = true;
  std::vector<NodeSpec> nodes;

  bool operator==(const ResourceSpec&) const = default;
};

struct SiteSpec {
  std::string id;
  std::vector<ResourceSpec> resources;

  bool operator==(const SiteSpec&) const = default;
};

struct TopologySpec {
  std::string id = "grid";
  std::vector<SiteSpec> sites;

  bool operator==(const TopologySpec&) const = default;
};

struct Job {
  std::string id;
  double total_work = 1.0;
  double serial_fraction = 0.0;
  double per_thread_overhead = 0.0;  // seconds per thread
  int min_processors = 1;
  double memory_need = 0.0;
  std::optional<SimTime> deadline_promise;
  int max_threads = 0;            // 0: no cap beyond the node
  double static_imbalance = 0.0;  // thread skew under Static scheduling, (max-mean)/max

  bool operator==(const Job&) const = default;
};

struct JobConfig {
  std::string resource_id;
  std::string node_id;
  int threads = 1;
  Scheduling scheduling = Scheduling::Static;

  bool operator==(const JobConfig&) const = default;
};

struct WorkRecord {
  SimTime start = 0.0;
  SimTime end = 0.0;
  double work = 0.0;
  std::string resource_id;
  std::string node_id;
  bool discarded = false;  // restart-based migration throws source work away
};

struct JobState {
  double progress = 0.0;
  JobStatus status = JobStatus::Pending;
  std::vector<WorkRecord> work_done_log;

  double logged_work() const {
    double sum = 0.0;
    for (const auto& rec : work_done_log)
      if (!rec.discarded) sum += rec.work;
    return sum;
  }
};

// Validates the topology portion of a run description and materialises the grid.
inline Grid build_topology(const TopologySpec& spec) {
  if (spec.sites.empty()) throw Error(Errc::EmptyTopology, "grid '" + spec.id + "' has no sites");

  std::set<std::string> site_ids, resource_ids, node_ids;
  Grid grid;
  grid.id = spec.id;
  for (const auto& ss : spec.sites) {
    if (!site_ids.insert(ss.id).second) throw Error(Errc::DuplicateId, "site '" + ss.id + "'");
    if (ss.resources.empty()) throw Error(Errc::EmptyTopology, "site '" + ss.id + "' has no resources");
    Site site{ss.id, {}};
    for (const auto& rs : ss.resources) {
      if (!resource_ids.insert(rs.id).second) throw Error(Errc::DuplicateId, "resource '" + rs.id + "'");
      if (rs.nodes.empty()) throw Error(Errc::EmptyTopology, "resource '" + rs.id + "' has no nodes");
      if (rs.kind != ResourceKind::Cluster && rs.nodes.size() != 1)
        throw Error(Errc::ValidationError,
                    std::string(to_string(rs.kind)) + " '" + rs.id + "' must have exactly one node");
      Resource res{rs.id, rs.kind, {}, rs.healthy};
      for (const auto& ns : rs.nodes) {
        if (!node_ids.insert(ns.id).second) throw Error(Errc::DuplicateId, "node '" + ns.id + "'");
        if (ns.processors < 1) throw Error(Errc::ValidationError, "node '" + ns.id + "' needs >= 1 processor");
        if (!(ns.speed > 0.0)) throw Error(Errc::ValidationError, "node '" + ns.id + "' speed must be > 0");
        if (!(ns.background_load >= 0.0 && ns.background_load <= 1.0))
          throw Error(Errc::ValidationError, "node '" + ns.id + "' background_load outside [0,1]");
        res.nodes.push_back(Node{ns.id, ns.processors, ns.speed, ns.background_load, ns.memory});
      }
      site.resources.push_back(std::move(res));
    }
    grid.sites.push_back(std::move(site));
  }
  return grid;
}

// Load-imbalance actually experienced by a job's threads.
inline double effective_imbalance(const Job& job, Scheduling scheduling, int p_eff) {
  if (scheduling == Scheduling::Dynamic || p_eff <= 1) return 0.0;
  return std::clamp(job.static_imbalance, 0.0, 1.0 - 1.0 / p_eff);
}

// Amdahl split with background dilution and linear per-thread overhead:
//   T = [s*W + (1-s)*W / p_eff / (1-imb)] / (speed * (1-bg)) + overhead * threads
// where p_eff = min(threads, processors). imb is zero unless the job is
// imbalanced and statically scheduled.
inline double predicted_exec_time(const Job& job, const Node& node, const JobConfig& config, double background) {
  if (config.threads < 1) throw Error(Errc::ValidationError, "threads must be >= 1");
  if (background >= 1.0) throw Error(Errc::SaturatedNode, "node '" + node.id + "' fully loaded");
  const int p_eff = std::min(config.threads, node.processors);
  const double w = job.total_work;
  const double s = job.serial_fraction;
  const double imb = effective_imbalance(job, config.scheduling, p_eff);
  const double compute = s * w + (1.0 - s) * w / p_eff / (1.0 - imb);
  return compute / (node.speed * (1.0 - background)) + job.per_thread_overhead * config.threads;
}

inline double remaining_time(const Job& job, const JobState& state, const Node& node, const JobConfig& config,
                             double background) {
  if (state.progress >= 1.0) return 0.0;
  return (1.0 - state.progress) * predicted_exec_time(job, node, config, background);
}

// Processors on a node not claimed by background load or running threads.
inline int free_processors(const Node& node, int threads_on_node) {
  const int usable = static_cast<int>(std::floor(node.processors * (1.0 - node.background_load) + 1e-9));
  return std::max(0, usable - threads_on_node);
}

// (occupied processors + background share) / total processors, clamped to [0,1].
// Configs placed on other resources are ignored.
inline double effective_load(const Resource& resource, std::span<const JobConfig> running) {
  const int total = resource.total_processors();
  if (total <= 0) return 0.0;
  double busy = 0.0;
  for (const auto& node : resource.nodes) {
    int threads = 0;
    for (const auto& cfg : running)
      if (cfg.resource_id == resource.id && cfg.node_id == node.id) threads += cfg.threads;
    busy += std::min(threads, node.processors) + node.background_load * node.processors;
  }
  return std::clamp(busy / total, 0.0, 1.0);
}

// Thread count in [1, cap] minimising the predicted time (smallest on ties).
inline int best_thread_count(const Job& job, const Node& node, Scheduling scheduling, double background, int cap) {
  cap = std::max(1, cap);
  int best = 1;
  double best_time = 0.0;
  for (int t = 1; t <= cap; ++t) {
    JobConfig cfg{"", node.id, t, scheduling};
    const double time = predicted_exec_time(job, node, cfg, background);
    if (t == 1 || time < best_time) {
      best = t;
      best_time = time;
    }
  }
  return best;
}

// Sorting workload: c * N * log2(N) work-units.
inline double sorting_work(double elements, double cost_per_element = 1.0) {
  if (elements <= 1.0) return cost_per_element;
  return cost_per_element * elements * std::log2(elements);
}

}  // namespace gridtune
