#pragma once

// Seeded generator of valid SimSpecs. Specs lean toward migration: the first
// resource is usually loaded (sometimes with load swings or a fault) and at
// least one roomy resource is idle.

#include <random>
#include <string>

#include "gridtune/sim_spec.hpp"

namespace gridtune::testing {

class SpecGenerator {
 public:
  explicit SpecGenerator(std::uint64_t seed) : rng_(seed) {}

  SimSpec next() {
    SimSpec s;
    s.seed = rng_();
    s.t_end = uniform(150.0, 400.0);
    s.topology.id = "grid";

    const int sites = pick(1, 2);
    int rcount = 0;
    int ncount = 0;
    for (int si = 0; si < sites; ++si) {
      SiteSpec site{"site" + std::to_string(si), {}};
      const int resources = pick(1, 3);
      for (int ri = 0; ri < resources; ++ri) {
        ResourceSpec r;
        r.id = "r" + std::to_string(rcount++);
        const int kind = pick(0, 2);
        r.kind = kind == 0 ? ResourceKind::Cluster : kind == 1 ? ResourceKind::SMP : ResourceKind::Workstation;
        const int nodes = r.kind == ResourceKind::Cluster ? pick(2, 3) : 1;
        for (int ni = 0; ni < nodes; ++ni) {
          NodeSpec n;
          n.id = "n" + std::to_string(ncount++);
          n.processors = r.kind == ResourceKind::Workstation ? pick(1, 2) : pick(2, 16);
          n.speed = uniform(0.5, 2.0);
          n.background_load = coin(0.3) ? uniform(0.0, 0.3) : 0.0;
          n.memory = uniform(50.0, 500.0);
          if (coin(0.15)) n.noise = uniform(0.0, 0.2);
          r.nodes.push_back(n);
        }
        site.resources.push_back(std::move(r));
      }
      s.topology.sites.push_back(std::move(site));
    }
    // A roomy idle resource somewhere.
    if (rcount == 1 || coin(0.7)) {
      ResourceSpec big{"r" + std::to_string(rcount++), ResourceKind::SMP, true, {}};
      big.nodes.push_back(NodeSpec{"n" + std::to_string(ncount++), pick(8, 16), uniform(0.8, 2.0), 0.0,
                                   uniform(200.0, 800.0), {}, 0.0});
      s.topology.sites.back().resources.push_back(std::move(big));
    }

    // Load the first resource.
    auto& hot = s.topology.sites.front().resources.front();
    for (auto& n : hot.nodes) {
      n.background_load = uniform(0.4, 0.9);
      if (coin(0.3)) {
        double t = uniform(5.0, 40.0);
        for (int k = 0; k < pick(1, 4); ++k) {
          n.background_schedule.push_back(LoadStep{t, coin(0.5) ? uniform(0.0, 0.3) : uniform(0.6, 1.0)});
          t += uniform(5.0, 60.0);
        }
      }
    }

    const int jobs = pick(1, 3);
    for (int j = 0; j < jobs; ++j) {
      JobSpec js;
      js.job.id = "job" + std::to_string(j);
      js.job.total_work = uniform(50.0, 600.0);
      js.job.serial_fraction = uniform(0.0, 0.4);
      js.job.per_thread_overhead = coin(0.3) ? uniform(0.0, 0.5) : 0.0;
      js.job.min_processors = pick(1, 2);
      js.job.memory_need = uniform(0.0, 40.0);
      if (coin(0.3)) js.job.max_threads = pick(2, 8);
      if (coin(0.3)) js.job.static_imbalance = uniform(0.0, 0.8);
      if (coin(0.4)) js.job.deadline_promise = uniform(20.0, 300.0);
      const auto& res = (j == 0 || coin(0.5)) ? hot : random_resource(s);
      const auto& node = res.nodes[static_cast<std::size_t>(pick(0, static_cast<int>(res.nodes.size()) - 1))];
      js.placement = JobConfig{res.id, node.id, pick(1, std::min(node.processors, 4)),
                               coin(0.5) ? Scheduling::Static : Scheduling::Dynamic};
      js.start_at = coin(0.3) ? uniform(0.0, 20.0) : 0.0;
      s.jobs.push_back(std::move(js));
    }

    if (coin(0.2)) {
      const auto& r = random_resource(s);
      const double at = uniform(2.0, 60.0);
      s.faults.push_back(FaultEvent{at, r.id, false});
      if (coin(0.5)) s.faults.push_back(FaultEvent{at + uniform(5.0, 60.0), r.id, true});
    }

    auto& p = s.params;
    p.sustain_periods = pick(1, 3);
    p.cooldown_window = uniform(3.0, 15.0);
    p.min_gain = uniform(0.0, 0.2);
    p.transfer_base = uniform(0.0, 2.0);
    p.transfer_per_memory = uniform(0.0, 0.05);
    if (coin(0.2)) p.restart_migration = true;
    if (coin(0.1)) p.buffer_capacity = static_cast<std::size_t>(pick(4, 16));
    if (coin(0.2)) p.pull_period = 2.0;
    return s;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool coin(double p) { return uniform(0.0, 1.0) < p; }

  const ResourceSpec& random_resource(const SimSpec& s) {
    std::vector<const ResourceSpec*> all;
    for (const auto& site : s.topology.sites)
      for (const auto& r : site.resources) all.push_back(&r);
    return *all[static_cast<std::size_t>(pick(0, static_cast<int>(all.size()) - 1))];
  }

  std::mt19937_64 rng_;
};

}  // namespace gridtune::testing
