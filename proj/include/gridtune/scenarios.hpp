#pragma once

// Built-in demonstration scenarios. Speeds, loads and work sizes are chosen
// values, not measurements.
//   scenario1: one 2-processor SMP, a 1-thread job the NA flags and the Tuning
//              Agent widens to 2 threads; paired with an untouched run.
//   scenario2: Server1 (2 procs, half loaded) and Server2 (16 procs) in one
//              site; a sorting job of N log2 N work-units per data size, run
//              migrated, stay-put and serial.

#include <cmath>
#include <future>
#include <string>
#include <vector>

#include "gridtune/reporting.hpp"
#include "gridtune/sim_spec.hpp"
#include "gridtune/simulation.hpp"

namespace gridtune {

inline SimSpec scenario1_spec(std::uint64_t seed = 42) {
  SimSpec s;
  s.seed = seed;
  s.t_end = 200.0;
  NodeSpec node;
  node.id = "smp1.n0";
  node.processors = 2;
  node.speed = 1.0;
  node.background_load = 0.0;
  s.topology.id = "grid";
  s.topology.sites = {SiteSpec{"site1", {ResourceSpec{"smp1", ResourceKind::SMP, true, {node}}}}};

  JobSpec job;
  job.job.id = "job1";
  job.job.total_work = 100.0;
  job.job.serial_fraction = 0.1;
  job.job.per_thread_overhead = 0.0;
  job.job.min_processors = 1;
  job.job.memory_need = 1.0;
  job.placement = JobConfig{"smp1", "smp1.n0", 1, Scheduling::Dynamic};
  s.jobs = {job};
  return s;
}

enum class Scenario2Variant { Migrated, StayPut, Serial };

inline std::string_view to_string(Scenario2Variant v) {
  switch (v) {
    case Scenario2Variant::Migrated: return "migrated";
    case Scenario2Variant::StayPut: return "stay-put";
    case Scenario2Variant::Serial: return "serial";
  }
  return "?";
}

inline constexpr double kScenario2Sizes[] = {1e5, 1e6, 1e7};

inline SimSpec scenario2_spec(double n, Scenario2Variant variant = Scenario2Variant::Migrated, std::uint64_t seed = 42) {
  SimSpec s;
  s.seed = seed;
  s.t_end = 20000.0;
  NodeSpec server1{"Server1.n0", 2, 1e5, 0.5, 64e3, {}, 0.0};
  NodeSpec server2{"Server2.n0", 16, 1e5, 0.0, 256e3, {}, 0.0};
  s.topology.id = "grid";
  s.topology.sites = {SiteSpec{"site1",
                               {ResourceSpec{"Server1", ResourceKind::SMP, true, {server1}},
                                ResourceSpec{"Server2", ResourceKind::SMP, true, {server2}}}}};

  JobSpec job;
  job.job.id = "sort";
  job.job.total_work = sorting_work(n, 1.0);
  job.job.serial_fraction = 0.05;
  job.job.per_thread_overhead = 0.0;
  job.job.min_processors = 2;
  job.job.memory_need = n * 8.0 / 1e6;
  job.job.max_threads = 4;
  job.placement = JobConfig{"Server1", "Server1.n0", 2, Scheduling::Dynamic};
  if (variant == Scenario2Variant::StayPut) s.params.migration_enabled = false;
  if (variant == Scenario2Variant::Serial) {
    job.placement.threads = 1;
    s.params.tuning_enabled = false;
    s.params.migration_enabled = false;
  }
  s.jobs = {job};
  return s;
}

struct ScenarioRun {
  std::string label;
  SimSpec spec;
  RunResult result;
};

struct ScenarioResult {
  std::string name;
  std::string job_id;
  std::vector<ScenarioRun> runs;
  std::vector<SpeedupTable> tables;
};

// Primary spec of a built-in scenario (scenario2: the 10^6 size, migrated).
inline SimSpec builtin_spec(const std::string& name, std::uint64_t seed = 42) {
  if (name == "scenario1") return scenario1_spec(seed);
  if (name == "scenario2") return scenario2_spec(1e6, Scenario2Variant::Migrated, seed);
  throw Error(Errc::UnknownScenario, "unknown scenario '" + name + "'");
}

inline bool is_builtin_scenario(const std::string& name) { return name == "scenario1" || name == "scenario2"; }

namespace detail {

inline std::string size_label(double n) {
  const int e = static_cast<int>(std::lround(std::log10(n)));
  return "N=1e" + std::to_string(e);
}

// Runs independent specs, optionally on separate threads; results keep input order.
inline std::vector<RunResult> run_all(const std::vector<SimSpec>& specs, bool parallel) {
  std::vector<RunResult> out;
  if (!parallel) {
    for (const auto& s : specs) out.push_back(Simulation(s).run());
    return out;
  }
  std::vector<std::future<RunResult>> futures;
  for (const auto& s : specs) futures.push_back(std::async(std::launch::async, [s] { return Simulation(s).run(); }));
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

}  // namespace detail

inline ScenarioResult run_scenario(const std::string& name, std::uint64_t seed = 42, bool parallel = true) {
  ScenarioResult r;
  r.name = name;
  std::vector<std::string> labels;
  std::vector<SimSpec> specs;
  std::vector<std::vector<std::size_t>> groups;

  if (name == "scenario1") {
    r.job_id = "job1";
    SimSpec untouched = scenario1_spec(seed);
    untouched.params.tuning_enabled = false;
    untouched.params.migration_enabled = false;
    labels = {"tuned", "untouched"};
    specs = {scenario1_spec(seed), untouched};
    groups = {{0, 1}};
  } else if (name == "scenario2") {
    r.job_id = "sort";
    for (double n : kScenario2Sizes) {
      std::vector<std::size_t> group;
      for (auto v : {Scenario2Variant::Migrated, Scenario2Variant::StayPut, Scenario2Variant::Serial}) {
        group.push_back(specs.size());
        labels.push_back(detail::size_label(n) + " " + std::string(to_string(v)));
        specs.push_back(scenario2_spec(n, v, seed));
      }
      groups.push_back(std::move(group));
    }
  } else {
    throw Error(Errc::UnknownScenario, "unknown scenario '" + name + "'");
  }

  auto results = detail::run_all(specs, parallel);
  for (std::size_t i = 0; i < specs.size(); ++i)
    r.runs.push_back(ScenarioRun{labels[i], specs[i], std::move(results[i])});
  for (const auto& g : groups) {
    std::vector<RunSummary> summaries;
    for (auto i : g) summaries.push_back(summarize(r.runs[i].result, r.runs[i].label, seed));
    r.tables.push_back(compare_runs(summaries, r.job_id));
  }
  return r;
}

}  // namespace gridtune
