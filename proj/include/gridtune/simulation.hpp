#pragma once

// The simulated grid: job execution under the performance model, probes
// feeding node buffers, and the agent actors (NA, RA, GSA, GA, Tuning Agent,
// JEM, JobController) wired through the kernel.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <set>
#include <vector>

#include "gridtune/analysis_agents.hpp"
#include "gridtune/control.hpp"
#include "gridtune/grid_model.hpp"
#include "gridtune/monitoring.hpp"
#include "gridtune/params.hpp"
#include "gridtune/protocol.hpp"
#include "gridtune/sim_kernel.hpp"
#include "gridtune/sim_spec.hpp"

namespace gridtune {

class Simulation;
using SimKernel = Kernel<Message>;
using SimMessage = AgentMessage<Message>;

namespace agent_id {
inline std::string monitor(const std::string& node) { return "monitor:" + node; }
inline std::string na(const std::string& node) { return "na:" + node; }
inline std::string ra(const std::string& resource) { return "ra:" + resource; }
inline std::string tuner(const std::string& resource) { return "tuner:" + resource; }
inline std::string gsa(const std::string& site) { return "gsa:" + site; }
inline std::string jem(const std::string& job) { return "jem:" + job; }
inline const std::string ga = "ga";
inline const std::string controller = "jc";
inline const std::string world = "world";
}  // namespace agent_id

struct JobOutcome {
  std::string job_id;
  JobStatus status = JobStatus::Pending;
  std::optional<SimTime> completed_at;
  double progress = 0.0;
  double total_work = 0.0;
  double logged_work = 0.0;
  int tunings = 0;
  int migrations = 0;
  std::vector<WorkRecord> work_log;
};

struct RunResult {
  EventLog log;
  std::vector<MetricSample> samples;
  AuditReport audit;
  std::vector<JobOutcome> jobs;
  SimTime end_time = 0.0;

  const JobOutcome* job(const std::string& id) const {
    for (const auto& j : jobs)
      if (j.job_id == id) return &j;
    return nullptr;
  }
};

namespace detail {

class PeriodicActor : public Actor<Message> {
 public:
  PeriodicActor(Simulation& sim, std::string id, double period, double phase)
      : sim_(sim), id_(std::move(id)), period_(period), phase_(phase) {}

  const std::string& id() const { return id_; }
  void start();
  void on_timer(const std::string& tag) override;
  void on_message(const SimMessage&) override {}

 protected:
  virtual void tick() = 0;
  Simulation& sim_;
  std::string id_;

 private:
  double period_;
  double phase_;
  long next_ = 1;
};

class MonitorActor final : public PeriodicActor {
 public:
  MonitorActor(Simulation& sim, std::string node_id);

 protected:
  void tick() override;

 private:
  std::string node_id_;
};

class NaActor final : public PeriodicActor {
 public:
  NaActor(Simulation& sim, NaState state, std::string site_id);
  const NaState& state() const { return state_; }

 protected:
  void tick() override;

 private:
  NaState state_;
  std::string site_id_;
};

class RaActor final : public PeriodicActor {
 public:
  RaActor(Simulation& sim, RaState state, std::string site_id);
  void on_message(const SimMessage& msg) override;
  const RaState& state() const { return state_; }

 protected:
  void tick() override;

 private:
  RaState state_;
  std::string site_id_;
  std::vector<NodeStatus> pending_;
};

class GsaActor final : public Actor<Message> {
 public:
  GsaActor(Simulation& sim, GsaState state) : sim_(sim), state_(std::move(state)) {}
  void on_message(const SimMessage& msg) override;
  void on_timer(const std::string&) override {}
  const GsaState& state() const { return state_; }

 private:
  Simulation& sim_;
  GsaState state_;
};

class GaActor final : public Actor<Message> {
 public:
  explicit GaActor(Simulation& sim) : sim_(sim) {}
  void on_message(const SimMessage& msg) override;
  void on_timer(const std::string&) override {}
  const GaState& state() const { return state_; }

 private:
  Simulation& sim_;
  GaState state_;
};

class TunerActor final : public Actor<Message> {
 public:
  TunerActor(Simulation& sim, std::string id) : sim_(sim), id_(std::move(id)) {}
  void on_message(const SimMessage& msg) override;
  void on_timer(const std::string&) override {}

 private:
  Simulation& sim_;
  std::string id_;
};

class JemActor final : public Actor<Message> {
 public:
  JemActor(Simulation& sim, JemState state) : sim_(sim), state_(std::move(state)) {}
  void on_message(const SimMessage& msg) override;
  void on_timer(const std::string& tag) override;
  const JemState& state() const { return state_; }

 private:
  void consult(const Warning& warning, std::optional<std::string> failed_target = std::nullopt);

  Simulation& sim_;
  JemState state_;
  std::optional<Warning> last_warning_;
  std::map<std::string, std::string> attempted_;  // consult id -> target it moved to
  std::set<std::string> retries_;                 // consult ids issued as retries
};

class ControllerActor final : public Actor<Message> {
 public:
  ControllerActor(Simulation& sim, std::vector<std::string> gsas) : sim_(sim), gsas_(std::move(gsas)) {}
  void on_message(const SimMessage& msg) override;
  void on_timer(const std::string&) override {}

 private:
  struct Pending {
    ConsultRequest request;
    std::size_t awaiting = 0;
    std::vector<ResourceStatus> candidates;
  };
  void advise(const ConsultRequest& req, std::variant<MigrationPlan, Stay> decision);

  Simulation& sim_;
  std::vector<std::string> gsas_;
  std::map<std::string, Pending> pending_;
};

class WorldActor final : public Actor<Message> {
 public:
  explicit WorldActor(Simulation& sim) : sim_(sim) {}
  void on_message(const SimMessage&) override {}
  void on_timer(const std::string& tag) override;

 private:
  Simulation& sim_;
};

}  // namespace detail

class Simulation {
 public:
  struct JobRuntime {
    Job job;
    JobSpec spec;
    JobConfig config;
    JobState state;
    double done = 0.0;
    SimTime segment_start = 0.0;
    double rate = 0.0;  // work-units per second
    std::uint64_t epoch = 0;
    std::optional<SimTime> last_tuned_at;
    std::optional<SimTime> completed_at;
    double work_since_probe = 0.0;
    int tunings = 0;
    int migrations = 0;
    std::optional<MigrationPlan> in_flight;
    JobConfig before_migration;

    // Latest tuning or migration decision, for predicted vs realized gain.
    struct Decision {
      std::string kind;
      SimTime predicted_finish = 0.0;
      SimTime baseline_finish = 0.0;  // finish had the decision not been taken
    };
    std::optional<Decision> decision;
  };

  struct NodeRuntime {
    std::string node_id;
    std::string resource_id;
    std::string site_id;
    double scheduled_background = 0.0;
    double noise = 0.0;
    Rng noise_rng{0};
    DataBuffer buffer;
    double busy = 0.0;  // processor-seconds since the last sample
    SimTime busy_since = 0.0;
  };

  explicit Simulation(SimSpec spec);
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const SimSpec& spec() const { return spec_; }
  const AgentParams& params() const { return spec_.params; }
  const Grid& grid() const { return grid_; }
  SimKernel& kernel() { return kernel_; }
  SimTime now() const { return kernel_.now(); }

  // Runs to the horizon given in the SimSpec.
  RunResult run() { return run_until(spec_.t_end); }
  RunResult run_until(SimTime t_end);
  RunResult result() const;

  const JobRuntime& job(const std::string& id) const { return *jobs_.at(index_.at(id)); }
  const std::vector<MetricSample>& samples() const { return samples_; }
  const GaState& ga_state() const { return ga_->state(); }

  // --- world operations (also used directly by tests) ----------------------

  // Applies a tuning action to a running job and replans its remaining work.
  JobConfig tune(const std::string& job_id, const TuningAction& action);

  // Stops the job at its source and resumes it at the target after the
  // transfer overhead.
  void execute_migration(MigrationPlan plan);

  JobSnapshot snapshot(const std::string& job_id) const;
  bool active() const;

 private:
  friend class detail::PeriodicActor;
  friend class detail::MonitorActor;
  friend class detail::NaActor;
  friend class detail::RaActor;
  friend class detail::GsaActor;
  friend class detail::GaActor;
  friend class detail::TunerActor;
  friend class detail::JemActor;
  friend class detail::ControllerActor;
  friend class detail::WorldActor;

  Node& node_ref(const std::string& node_id);
  const Node& node_ref(const std::string& node_id) const;
  NodeRuntime& node_rt(const std::string& node_id) { return *nodes_.at(node_index_.at(node_id)); }
  JobRuntime& job_rt(const std::string& id) { return *jobs_.at(index_.at(id)); }
  bool resource_healthy(const std::string& resource_id) const;
  bool on_node(const JobRuntime& j, const std::string& node_id) const;
  int threads_on_node(const std::string& node_id, const JobRuntime* except = nullptr) const;
  double current_progress(const JobRuntime& j) const;

  void account(const std::string& node_id);
  void settle(JobRuntime& j, bool finishing = false);
  void replan(JobRuntime& j);
  void set_background(const std::string& node_id, double load);
  void set_health(const std::string& resource_id, bool healthy);
  void on_job_phase(const JobPhase& phase);
  void start_job(JobRuntime& j);
  void complete_job(JobRuntime& j);
  void resume_job(JobRuntime& j);
  void probe(const std::string& node_id);
  NaNodeView na_view(const std::string& node_id) const;
  NodeStatus node_status(const std::string& node_id, double cpu, SimTime last_heartbeat) const;
  void notify_jem(const JobRuntime& j, JobNotice::Kind kind, const std::string& consult_id = {});

  std::string next_id(char prefix) { return std::string(1, prefix) + std::to_string(++counters_[prefix]); }
  const Json& log(std::string_view type, Json fields) { return kernel_.log().append(now(), type, std::move(fields)); }

  SimSpec spec_;
  Grid grid_;
  SimKernel kernel_;
  std::vector<std::unique_ptr<JobRuntime>> jobs_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::unique_ptr<NodeRuntime>> nodes_;
  std::map<std::string, std::size_t> node_index_;
  std::vector<MetricSample> samples_;
  std::map<char, std::uint64_t> counters_;

  std::vector<std::unique_ptr<Actor<Message>>> actors_;
  detail::GaActor* ga_ = nullptr;
};

// ===========================================================================
// Simulation

inline Simulation::Simulation(SimSpec spec)
    : spec_((validate(spec), std::move(spec))), grid_(build_topology(spec_.topology)),
      kernel_(spec_.params.latency, spec_.seed) {
  const auto& p = spec_.params;
  kernel_.on_job_phase([this](const JobPhase& ph) { on_job_phase(ph); });

  auto world = std::make_unique<detail::WorldActor>(*this);
  kernel_.register_agent(agent_id::world, Location{}, *world);
  actors_.push_back(std::move(world));

  auto ga = std::make_unique<detail::GaActor>(*this);
  ga_ = ga.get();
  kernel_.register_agent(agent_id::ga, Location{}, *ga);
  actors_.push_back(std::move(ga));

  std::vector<std::string> gsa_ids;
  for (const auto& s : grid_.sites) gsa_ids.push_back(agent_id::gsa(s.id));
  std::sort(gsa_ids.begin(), gsa_ids.end());
  auto jc = std::make_unique<detail::ControllerActor>(*this, gsa_ids);
  kernel_.register_agent(agent_id::controller, Location{grid_.sites.front().id, "", ""}, *jc);
  actors_.push_back(std::move(jc));

  std::vector<detail::PeriodicActor*> monitors, nas, ras;
  for (std::size_t si = 0; si < grid_.sites.size(); ++si) {
    const auto& site = grid_.sites[si];
    GsaState gs;
    gs.agent_id = agent_id::gsa(site.id);
    gs.site_id = site.id;
    gs.params = p;
    gs.subscribers = {agent_id::controller};
    for (const auto& r : site.resources) gs.resource_ids.insert(r.id);
    auto gsa = std::make_unique<detail::GsaActor>(*this, std::move(gs));
    kernel_.register_agent(agent_id::gsa(site.id), Location{site.id, "", ""}, *gsa);
    actors_.push_back(std::move(gsa));

    for (std::size_t ri = 0; ri < site.resources.size(); ++ri) {
      const auto& res = site.resources[ri];
      const auto& rspec = spec_.topology.sites[si].resources[ri];
      const Location res_loc{site.id, res.id, res.nodes.front().id};

      auto tuner = std::make_unique<detail::TunerActor>(*this, agent_id::tuner(res.id));
      kernel_.register_agent(agent_id::tuner(res.id), res_loc, *tuner);
      actors_.push_back(std::move(tuner));

      RaState rs;
      rs.agent_id = agent_id::ra(res.id);
      rs.resource = res;
      rs.params = p;
      rs.healthy = res.healthy;
      auto ra = std::make_unique<detail::RaActor>(*this, std::move(rs), site.id);
      kernel_.register_agent(agent_id::ra(res.id), res_loc, *ra);
      ras.push_back(ra.get());
      actors_.push_back(std::move(ra));

      for (std::size_t ni = 0; ni < res.nodes.size(); ++ni) {
        const auto& node = res.nodes[ni];
        const auto& nspec = rspec.nodes[ni];
        auto rt = std::make_unique<NodeRuntime>(NodeRuntime{node.id, res.id, site.id, node.background_load,
                                                            nspec.noise, kernel_.rng("noise:" + node.id),
                                                            DataBuffer(node.id, p.buffer_capacity), 0.0, 0.0});
        node_index_[node.id] = nodes_.size();
        nodes_.push_back(std::move(rt));

        const Location node_loc{site.id, res.id, node.id};
        auto mon = std::make_unique<detail::MonitorActor>(*this, node.id);
        kernel_.register_agent(mon->id(), node_loc, *mon);
        monitors.push_back(mon.get());
        actors_.push_back(std::move(mon));

        NaState ns;
        ns.agent_id = agent_id::na(node.id);
        ns.node_id = node.id;
        ns.resource_id = res.id;
        ns.params = p;
        node_rt(node.id).buffer.register_consumer(ns.agent_id);
        auto na = std::make_unique<detail::NaActor>(*this, std::move(ns), site.id);
        kernel_.register_agent(na->id(), node_loc, *na);
        nas.push_back(na.get());
        actors_.push_back(std::move(na));

        for (std::size_t k = 0; k < nspec.background_schedule.size(); ++k)
          kernel_.schedule_timer(nspec.background_schedule[k].at, agent_id::world,
                                 "bg:" + node.id + ":" + std::to_string(k));
      }
    }
  }

  for (const auto& js : spec_.jobs) {
    auto j = std::make_unique<JobRuntime>();
    j->job = js.job;
    j->spec = js;
    j->config = js.placement;
    index_[js.job.id] = jobs_.size();
    jobs_.push_back(std::move(j));

    JemState st;
    st.agent_id = agent_id::jem(js.job.id);
    st.params = p;
    st.jobs[js.job.id] = js.job;
    auto jem = std::make_unique<detail::JemActor>(*this, std::move(st));
    const Site* home = grid_.site_of(js.placement.resource_id);
    kernel_.register_agent(agent_id::jem(js.job.id), Location{home->id, "", ""}, *jem);
    actors_.push_back(std::move(jem));
    kernel_.schedule_job_phase(js.start_at, js.job.id, "start", 0);
    if (js.job.deadline_promise)
      kernel_.schedule_timer(*js.job.deadline_promise, agent_id::jem(js.job.id), "deadline");
  }

  for (std::size_t k = 0; k < spec_.faults.size(); ++k)
    kernel_.schedule_timer(spec_.faults[k].at, agent_id::world, "fault:" + std::to_string(k));

  // Probes before analysers so a tick's sample is visible to the same tick's pull.
  for (auto* a : monitors) a->start();
  for (auto* a : nas) a->start();
  for (auto* a : ras) a->start();
}

inline Node& Simulation::node_ref(const std::string& node_id) {
  const NodeRuntime& rt = node_rt(node_id);
  return *grid_.find_resource(rt.resource_id)->find_node(node_id);
}

inline const Node& Simulation::node_ref(const std::string& node_id) const {
  const NodeRuntime& rt = *nodes_.at(node_index_.at(node_id));
  return *grid_.find_resource(rt.resource_id)->find_node(node_id);
}

inline bool Simulation::resource_healthy(const std::string& resource_id) const {
  const Resource* r = grid_.find_resource(resource_id);
  return r && r->healthy;
}

inline bool Simulation::on_node(const JobRuntime& j, const std::string& node_id) const {
  return (j.state.status == JobStatus::Running || j.state.status == JobStatus::Failed) && j.config.node_id == node_id;
}

inline int Simulation::threads_on_node(const std::string& node_id, const JobRuntime* except) const {
  int n = 0;
  for (const auto& j : jobs_)
    if (j.get() != except && on_node(*j, node_id)) n += j->config.threads;
  return n;
}

inline double Simulation::current_progress(const JobRuntime& j) const {
  if (j.state.status != JobStatus::Running || j.rate <= 0.0) return j.state.progress;
  const double done = std::min(j.job.total_work, j.done + j.rate * (now() - j.segment_start));
  return std::min(1.0, done / j.job.total_work);
}

inline bool Simulation::active() const {
  return std::any_of(jobs_.begin(), jobs_.end(), [](const auto& j) { return j->state.status != JobStatus::Done; });
}

// Integrates node busy time up to now at the current occupancy.
inline void Simulation::account(const std::string& node_id) {
  NodeRuntime& rt = node_rt(node_id);
  const Node& node = node_ref(node_id);
  const double dt = now() - rt.busy_since;
  if (dt > 0.0 && resource_healthy(rt.resource_id)) {
    int threads = 0;
    for (const auto& j : jobs_)
      if (j->state.status == JobStatus::Running && j->config.node_id == node_id) threads += j->config.threads;
    const double busy = std::min<double>(node.processors, std::min(threads, node.processors) +
                                                              node.background_load * node.processors);
    rt.busy += busy * dt;
  }
  rt.busy_since = now();
}

inline void Simulation::settle(JobRuntime& j, bool finishing) {
  const SimTime t = now();
  if (j.state.status == JobStatus::Running && j.rate > 0.0 && t > j.segment_start) {
    const double remaining = j.job.total_work - j.done;
    const double work = finishing ? remaining : std::min(remaining, j.rate * (t - j.segment_start));
    if (work > 0.0) {
      j.state.work_done_log.push_back(WorkRecord{j.segment_start, t, work, j.config.resource_id, j.config.node_id});
      j.done += work;
      j.work_since_probe += work;
      j.state.progress = std::min(1.0, j.done / j.job.total_work);
    }
  }
  j.segment_start = t;
}

// Recomputes the execution rate after any change and reschedules completion.
inline void Simulation::replan(JobRuntime& j) {
  ++j.epoch;
  j.rate = 0.0;
  if (j.state.status != JobStatus::Running) return;
  const Node& node = node_ref(j.config.node_id);
  if (node.background_load >= 1.0) return;
  j.rate = j.job.total_work / predicted_exec_time(j.job, node, j.config, node.background_load);
  const double left = j.job.total_work - j.done;
  kernel_.schedule_job_phase(now() + left / j.rate, j.job.id, "complete", j.epoch);
}

inline void Simulation::set_background(const std::string& node_id, double load) {
  Node& node = node_ref(node_id);
  if (node.background_load == load) return;
  account(node_id);
  for (auto& j : jobs_)
    if (on_node(*j, node_id)) settle(*j);
  node.background_load = load;
  for (auto& j : jobs_)
    if (on_node(*j, node_id)) replan(*j);
}

inline void Simulation::set_health(const std::string& resource_id, bool healthy) {
  Resource* res = grid_.find_resource(resource_id);
  if (res->healthy == healthy) return;
  for (const auto& n : res->nodes) account(n.id);
  for (auto& j : jobs_) {
    if (j->config.resource_id != resource_id) continue;
    if (j->state.status != JobStatus::Running && j->state.status != JobStatus::Failed) continue;
    settle(*j);
  }
  res->healthy = healthy;
  log("resource_health", Json{{"resource", resource_id}, {"healthy", healthy}});
  for (auto& j : jobs_) {
    if (j->config.resource_id != resource_id) continue;
    if (j->state.status != JobStatus::Running && j->state.status != JobStatus::Failed) continue;
    j->state.status = healthy ? JobStatus::Running : JobStatus::Failed;
    j->segment_start = now();
    replan(*j);
  }
}

inline void Simulation::start_job(JobRuntime& j) {
  account(j.config.node_id);
  j.state.status = resource_healthy(j.config.resource_id) ? JobStatus::Running : JobStatus::Failed;
  j.segment_start = now();
  log("job_start", Json{{"job", j.job.id},
                        {"resource", j.config.resource_id},
                        {"node", j.config.node_id},
                        {"threads", j.config.threads},
                        {"scheduling", to_string(j.config.scheduling)},
                        {"status", to_string(j.state.status)}});
  replan(j);
}

inline void Simulation::complete_job(JobRuntime& j) {
  account(j.config.node_id);
  settle(j, true);
  j.state.progress = 1.0;
  j.state.status = JobStatus::Done;
  j.completed_at = now();
  ++j.epoch;
  j.rate = 0.0;
  Json fields{{"job", j.job.id},
              {"completion", now()},
              {"resource", j.config.resource_id},
              {"node", j.config.node_id},
              {"threads", j.config.threads},
              {"total_work", j.job.total_work},
              {"logged_work", j.state.logged_work()},
              {"tunings", j.tunings},
              {"migrations", j.migrations}};
  if (j.decision)
    fields["decision"] = Json{{"kind", j.decision->kind},
                              {"predicted_finish", finite_or_null(j.decision->predicted_finish)},
                              {"baseline_finish", finite_or_null(j.decision->baseline_finish)},
                              {"realized_gain", finite_or_null(j.decision->baseline_finish - now())}};
  log("job_done", std::move(fields));
  notify_jem(j, JobNotice::Kind::Done);
}

inline void Simulation::notify_jem(const JobRuntime& j, JobNotice::Kind kind, const std::string& consult_id) {
  kernel_.send(SimMessage{agent_id::world, agent_id::jem(j.job.id), now(), 0.0,
                          Message{JobNotice{kind, j.job.id, now(), consult_id}}});
}

inline JobConfig Simulation::tune(const std::string& job_id, const TuningAction& action) {
  JobRuntime& j = job_rt(job_id);
  const Node& node = node_ref(j.config.node_id);
  const JobConfig before = j.config;
  const JobConfig after = apply_tuning(j.state, j.config, action, node, params().strict_capacity);

  account(j.config.node_id);
  settle(j);
  const double bg = node.background_load;
  const double full_before = bg < 1.0 ? predicted_exec_time(j.job, node, before, bg) : INFINITY;
  const double full_after = bg < 1.0 ? predicted_exec_time(j.job, node, after, bg) : INFINITY;
  const double left = 1.0 - j.state.progress;
  j.config = after;
  j.last_tuned_at = now();
  j.decision = JobRuntime::Decision{"tuning", now() + left * full_after, now() + left * full_before};
  ++j.tunings;
  replan(j);
  Json act = action.kind == TuningAction::Kind::SetThreads
                 ? Json{{"kind", "SetThreads"}, {"threads", action.threads}}
                 : Json{{"kind", "SetScheduling"}, {"scheduling", to_string(action.scheduling)}};
  log("tuning", Json{{"job", job_id},
                     {"node", after.node_id},
                     {"action", std::move(act)},
                     {"threads_before", before.threads},
                     {"threads_after", after.threads},
                     {"scheduling_before", to_string(before.scheduling)},
                     {"scheduling_after", to_string(after.scheduling)},
                     {"progress", j.state.progress},
                     {"predicted_full_before", finite_or_null(full_before)},
                     {"predicted_full_after", finite_or_null(full_after)},
                     {"predicted_finish_before", finite_or_null(now() + left * full_before)},
                     {"predicted_finish_after", finite_or_null(now() + left * full_after)}});
  return after;
}

inline void Simulation::execute_migration(MigrationPlan plan) {
  JobRuntime& j = job_rt(plan.job_id);
  if (j.state.status != JobStatus::Running && j.state.status != JobStatus::Failed)
    throw Error(Errc::JobNotRunning, "job '" + plan.job_id + "' cannot migrate while " +
                                         std::string(to_string(j.state.status)));
  if (plan.target_resource == j.config.resource_id)
    throw Error(Errc::ValidationError, "migration target equals source");
  if (!grid_.find_resource(plan.target_resource) || !grid_.find_resource(plan.target_resource)->find_node(plan.target_node))
    throw Error(Errc::TargetUnavailable, "unknown target '" + plan.target_resource + "/" + plan.target_node + "'");

  account(j.config.node_id);
  settle(j);
  plan.checkpoint_progress = j.state.progress;
  j.before_migration = j.config;
  j.state.status = JobStatus::Migrating;
  replan(j);  // rate 0, stale completion dropped
  log("migration_start", Json{{"job", j.job.id},
                              {"consult_id", plan.consult_id},
                              {"source", {{"resource", plan.source_resource}, {"node", plan.source_node}}},
                              {"target", {{"resource", plan.target_resource}, {"node", plan.target_node}}},
                              {"threads", plan.threads},
                              {"checkpoint_progress", plan.checkpoint_progress},
                              {"transfer_overhead", plan.transfer_overhead},
                              {"predicted_gain", finite_or_null(plan.predicted_gain)}});
  kernel_.schedule_job_phase(now() + plan.transfer_overhead, j.job.id, "resume", j.epoch);
  j.decision = JobRuntime::Decision{"migration", plan.decided_at + plan.transfer_overhead + plan.target_remaining,
                                    plan.decided_at + plan.source_remaining};
  j.in_flight = std::move(plan);
}

inline void Simulation::resume_job(JobRuntime& j) {
  const MigrationPlan plan = *j.in_flight;
  j.in_flight.reset();
  const Resource* target = grid_.find_resource(plan.target_resource);
  const Node& tnode = *target->find_node(plan.target_node);
  std::string reason;
  if (!target->healthy)
    reason = "target unhealthy";
  else if (tnode.background_load >= 1.0)
    reason = "target saturated";
  else if (free_processors(tnode, threads_on_node(tnode.id, &j)) < plan.threads)
    reason = "target lacks free processors";

  j.segment_start = now();
  if (reason.empty()) {
    if (params().restart_migration) {
      for (auto& rec : j.state.work_done_log) rec.discarded = true;
      j.done = 0.0;
      j.state.progress = 0.0;
    }
    account(tnode.id);
    j.config = JobConfig{plan.target_resource, plan.target_node, plan.threads, j.config.scheduling};
    j.state.status = JobStatus::Running;
    ++j.migrations;
    replan(j);
    log("migration_end", Json{{"job", j.job.id},
                              {"consult_id", plan.consult_id},
                              {"resource", plan.target_resource},
                              {"node", plan.target_node},
                              {"threads", plan.threads},
                              {"progress", j.state.progress},
                              {"restart", params().restart_migration}});
    notify_jem(j, JobNotice::Kind::Resumed, plan.consult_id);
    return;
  }
  account(j.before_migration.node_id);
  j.config = j.before_migration;
  j.state.status = resource_healthy(j.config.resource_id) ? JobStatus::Running : JobStatus::Failed;
  replan(j);
  log("target_unavailable", Json{{"job", j.job.id},
                                 {"consult_id", plan.consult_id},
                                 {"target", plan.target_resource},
                                 {"reason", reason},
                                 {"back_at", j.config.resource_id}});
  notify_jem(j, JobNotice::Kind::TargetUnavailable, plan.consult_id);
}

inline void Simulation::on_job_phase(const JobPhase& phase) {
  auto it = index_.find(phase.job_id);
  if (it == index_.end()) return;
  JobRuntime& j = *jobs_[it->second];
  if (phase.kind == "start") {
    if (j.state.status == JobStatus::Pending) start_job(j);
    return;
  }
  if (phase.token != j.epoch) return;
  if (phase.kind == "complete" && j.state.status == JobStatus::Running) complete_job(j);
  else if (phase.kind == "resume" && j.state.status == JobStatus::Migrating) resume_job(j);
}

// Records the interval's samples for one node, then applies background noise
// for the next interval.
inline void Simulation::probe(const std::string& node_id) {
  NodeRuntime& rt = node_rt(node_id);
  const Node& node = node_ref(node_id);
  const SimTime t = now();
  account(node_id);
  const double busy = rt.busy;
  rt.busy = 0.0;

  auto record = [&](MetricSample s) {
    samples_.push_back(s);
    if (auto dropped = rt.buffer.record_sample(std::move(s)))
      log("sample_drop", Json{{"node", node_id}, {"at", dropped->at}, {"kind", to_string(dropped->kind)}});
  };

  if (resource_healthy(rt.resource_id)) {
    record(MetricSample{t, node_id, MetricKind::CpuBusy, busy, "", -1});
    double memory = 0.0;
    for (const auto& j : jobs_)
      if (on_node(*j, node_id)) memory += j->job.memory_need;
    record(MetricSample{t, node_id, MetricKind::MemPressure,
                        node.memory > 0.0 ? std::clamp(memory / node.memory, 0.0, 1.0) : 0.0, "", -1});
    for (auto& jp : jobs_) {
      JobRuntime& j = *jp;
      if (j.state.status != JobStatus::Running || j.config.node_id != node_id) continue;
      settle(j);
      const double w = j.work_since_probe;
      j.work_since_probe = 0.0;
      const int threads = j.config.threads;
      const double imb = effective_imbalance(j.job, j.config.scheduling, threads);
      const double heavy = threads > 1 ? (w / threads) / (1.0 - imb) : w;
      const double light = threads > 1 ? (w - heavy) / (threads - 1) : 0.0;
      for (int k = 0; k < threads; ++k)
        record(MetricSample{t, node_id, MetricKind::ThreadWork, k == 0 ? heavy : std::max(0.0, light), j.job.id, k});
    }
    record(MetricSample{t, node_id, MetricKind::Heartbeat, 1.0, "", -1});
  }

  if (rt.noise > 0.0) {
    const double jitter = rt.noise_rng.uniform(-rt.noise, rt.noise);
    set_background(node_id, std::clamp(rt.scheduled_background + jitter, 0.0, 0.99));
  }
}

inline NaNodeView Simulation::na_view(const std::string& node_id) const {
  NaNodeView v;
  v.node = node_ref(node_id);
  v.now = now();
  for (const auto& j : jobs_)
    if (on_node(*j, node_id)) v.jobs.push_back(NaJobView{j->job, j->config, j->state.status, j->last_tuned_at});
  return v;
}

inline NodeStatus Simulation::node_status(const std::string& node_id, double cpu, SimTime last_heartbeat) const {
  const Node& node = node_ref(node_id);
  NodeStatus s;
  s.node_id = node_id;
  s.processors = node.processors;
  s.free_processors = free_processors(node, threads_on_node(node_id));
  s.speed = node.speed;
  s.background_load = node.background_load;
  s.memory = node.memory;
  s.cpu_usage = cpu;
  s.last_heartbeat = last_heartbeat;
  for (const auto& j : jobs_) {
    if (!on_node(*j, node_id)) continue;
    const double progress = current_progress(*j);
    const double finish = j->rate > 0.0 ? now() + (j->job.total_work * (1.0 - progress)) / j->rate
                                        : std::numeric_limits<double>::infinity();
    s.jobs.push_back(NodeJob{j->job.id, j->config.threads, progress, finish});
  }
  return s;
}

inline JobSnapshot Simulation::snapshot(const std::string& job_id) const {
  const JobRuntime& j = *jobs_.at(index_.at(job_id));
  JobSnapshot s;
  s.job = j.job;
  s.config = j.config;
  s.progress = current_progress(j);
  s.status = j.state.status;
  s.source_node = node_ref(j.config.node_id);
  s.source_background = s.source_node.background_load;
  s.source_healthy = resource_healthy(j.config.resource_id);
  s.last_tuned_at = j.last_tuned_at;
  return s;
}

inline RunResult Simulation::run_until(SimTime t_end) {
  kernel_.run_until(t_end);
  return result();
}

inline RunResult Simulation::result() const {
  RunResult r;
  r.log = kernel_.log();
  r.samples = samples_;
  r.audit = ga_audit(ga_->state());
  r.end_time = kernel_.now();
  for (const auto& j : jobs_) {
    JobOutcome o;
    o.job_id = j->job.id;
    o.status = j->state.status;
    o.completed_at = j->completed_at;
    o.progress = j->state.progress;
    o.total_work = j->job.total_work;
    o.logged_work = j->state.logged_work();
    o.tunings = j->tunings;
    o.migrations = j->migrations;
    o.work_log = j->state.work_done_log;
    r.jobs.push_back(std::move(o));
  }
  return r;
}

// ===========================================================================
// Actors

namespace detail {

inline void PeriodicActor::start() { sim_.kernel_.schedule_timer(phase_ + period_, id_, "tick"); }

inline void PeriodicActor::on_timer(const std::string&) {
  tick();
  ++next_;
  if (sim_.active()) sim_.kernel_.schedule_timer(phase_ + period_ * static_cast<double>(next_), id_, "tick");
}

inline MonitorActor::MonitorActor(Simulation& sim, std::string node_id)
    : PeriodicActor(sim, agent_id::monitor(node_id), sim.params().sample_period, 0.0), node_id_(std::move(node_id)) {}

inline void MonitorActor::tick() { sim_.probe(node_id_); }

inline NaActor::NaActor(Simulation& sim, NaState state, std::string site_id)
    : PeriodicActor(sim, state.agent_id, sim.params().pull_period, 0.0), state_(std::move(state)),
      site_id_(std::move(site_id)) {}

inline void NaActor::tick() {
  auto& rt = sim_.node_rt(state_.node_id);
  const auto pulled = rt.buffer.pull(id_);
  const auto view = sim_.na_view(state_.node_id);
  auto findings = na_step(state_, pulled, view);
  for (auto& f : findings) {
    f.id = sim_.next_id('f');
    sim_.log("finding", to_log(f));
    Warning w;
    w.id = sim_.next_id('w');
    w.finding = f;
    if (f.problem == ProblemClass::LocallyTunable) {
      w.severity = Severity::Warn;
      w.target = agent_id::tuner(state_.resource_id);
    } else {
      w.severity = f.problem == ProblemClass::Fault ? Severity::Critical : Severity::Warn;
      w.target = agent_id::gsa(site_id_);
    }
    Json jw = to_log(w);
    jw["from"] = id_;
    sim_.log("warning", std::move(jw));
    sim_.kernel_.send(id_, w.target, Message{WarningMsg{w}});
  }
  sim_.kernel_.send(id_, agent_id::ra(state_.resource_id),
                    Message{NodeReport{sim_.node_status(state_.node_id, state_.last_cpu_usage, state_.last_heartbeat)}});
}

inline RaActor::RaActor(Simulation& sim, RaState state, std::string site_id)
    : PeriodicActor(sim, state.agent_id, sim.params().pull_period, 0.5 * sim.params().pull_period),
      state_(std::move(state)), site_id_(std::move(site_id)) {}

inline void RaActor::on_message(const SimMessage& msg) {
  if (const auto* r = std::get_if<NodeReport>(&msg.payload.body)) pending_.push_back(r->status);
}

inline void RaActor::tick() {
  state_.healthy = sim_.resource_healthy(state_.resource.id);
  auto res = ra_aggregate(state_, pending_, sim_.now());
  pending_.clear();
  StatusReport report{res.status, {}};
  if (res.overload) {
    res.overload->id = sim_.next_id('f');
    sim_.log("finding", to_log(*res.overload));
    report.findings.push_back(*res.overload);
  }
  sim_.kernel_.send(id_, agent_id::gsa(site_id_), Message{std::move(report)});
}

inline void GsaActor::on_message(const SimMessage& msg) {
  const std::string& me = state_.agent_id;
  auto register_finding = [&](const Finding& f) { sim_.kernel_.send(me, agent_id::ga, Message{RegisterMsg{f}}); };

  if (const auto* r = std::get_if<StatusReport>(&msg.payload.body)) {
    for (const auto& f : r->findings) register_finding(f);
    const ResourceStatus statuses[] = {r->status};
    auto res = gsa_summarize(state_, statuses, sim_.now());
    std::map<std::string, std::string> ids;  // resource+class -> finding id
    for (auto& f : res.new_problems) {
      f.id = sim_.next_id('f');
      ids[f.resource_id + "/" + std::string(to_string(f.problem))] = f.id;
      sim_.log("finding", to_log(f));
      register_finding(f);
    }
    for (auto& w : res.proactive) {
      w.id = sim_.next_id('w');
      w.finding.id = ids[w.finding.resource_id + "/" + std::string(to_string(w.finding.problem))];
      Json jw = to_log(w);
      jw["from"] = me;
      sim_.log("warning", std::move(jw));
      sim_.kernel_.send(me, w.target, Message{WarningMsg{w}});
    }
  } else if (const auto* wm = std::get_if<WarningMsg>(&msg.payload.body)) {
    const Finding& f = wm->warning.finding;
    register_finding(f);
    if (!f.job_id) return;
    Warning w;
    w.id = sim_.next_id('w');
    w.finding = f;
    w.severity = f.problem == ProblemClass::Fault ? Severity::Critical : Severity::Warn;
    w.target = agent_id::jem(*f.job_id);
    Json jw = to_log(w);
    jw["from"] = me;
    sim_.log("warning", std::move(jw));
    sim_.kernel_.send(me, w.target, Message{WarningMsg{w}});
  } else if (const auto* q = std::get_if<LoadQuery>(&msg.payload.body)) {
    state_.now = std::max(state_.now, sim_.now());
    sim_.kernel_.send(me, msg.from, Message{LoadReply{q->consult_id, state_.site_id, gsa_query_load(state_, q->requirement)}});
  }
}

inline void GaActor::on_message(const SimMessage& msg) {
  if (const auto* r = std::get_if<RegisterMsg>(&msg.payload.body)) {
    ga_register(state_, r->record, msg.from, sim_.now());
    Json fields = std::holds_alternative<Finding>(r->record)
                      ? Json{{"from", msg.from}, {"finding_id", std::get<Finding>(r->record).id}}
                      : Json{{"from", msg.from}, {"audit", to_log(std::get<AuditRecord>(r->record))}};
    sim_.log("register", std::move(fields));
  }
}

inline void TunerActor::on_message(const SimMessage& msg) {
  const auto* wm = std::get_if<WarningMsg>(&msg.payload.body);
  if (!wm) return;
  const Finding& f = wm->warning.finding;
  auto reject = [&](const std::string& reason) {
    sim_.log("tuning_rejected", Json{{"job", f.job_id.value_or("")}, {"finding_id", f.id}, {"reason", reason}});
  };
  if (!f.job_id) return reject("finding names no job");
  if (!sim_.params().tuning_enabled) return reject("tuning disabled");
  const auto& j = sim_.job(*f.job_id);
  if (j.state.status != JobStatus::Running || j.config.node_id != f.node_id) return reject("job no longer on node");
  try {
    const TuningAction action = select_tuning_action(f, sim_.node_ref(j.config.node_id), j.config);
    sim_.tune(*f.job_id, TuningAction{action.kind, action.threads, action.scheduling, *f.job_id, sim_.now()});
  } catch (const Error& e) {
    reject(e.what());
  }
}

// A retry follows a refused transfer; the refused target is excluded and a
// retry is never itself retried.
inline void JemActor::consult(const Warning& warning, std::optional<std::string> failed_target) {
  const bool retry = failed_target.has_value();
  const std::string& job_id = *warning.finding.job_id;
  ConsultRequest req;
  req.id = sim_.next_id('c');
  req.job_id = job_id;
  req.jem_id = state_.agent_id;
  const Job& job = state_.jobs.at(job_id);
  req.requirement = Requirement{std::max(1, job.min_processors), job.memory_need};
  req.warning = warning;
  req.snapshot = sim_.snapshot(job_id);
  req.retry = retry;
  if (retry) {
    req.excluded.push_back(*failed_target);
    retries_.insert(req.id);
  }
  sim_.log("consult", Json{{"id", req.id}, {"job", job_id}, {"warning_id", warning.id}, {"retry", retry},
                           {"progress", req.snapshot.progress}});
  sim_.kernel_.send(state_.agent_id, agent_id::controller, Message{ConsultMsg{std::move(req)}});
}

inline void JemActor::on_message(const SimMessage& msg) {
  const std::string& me = state_.agent_id;
  if (const auto* wm = std::get_if<WarningMsg>(&msg.payload.body)) {
    const Warning& w = wm->warning;
    try {
      const auto& job = sim_.job(w.finding.job_id.value_or(""));
      if (job.state.status != JobStatus::Running && job.state.status != JobStatus::Failed) {
        sim_.log("warning_ignored", Json{{"warning_id", w.id}, {"reason", "job " + std::string(to_string(job.state.status))}});
        return;
      }
      auto req = jem_on_warning(state_, w, sim_.now());
      if (!req) {
        sim_.log("warning_suppressed", Json{{"warning_id", w.id}, {"job", *w.finding.job_id}});
        return;
      }
      last_warning_ = w;
      consult(w);
    } catch (const std::out_of_range&) {
      sim_.log("warning_ignored", Json{{"warning_id", w.id}, {"reason", "unmanaged job"}});
    } catch (const Error& e) {
      sim_.log("warning_ignored", Json{{"warning_id", w.id}, {"reason", e.what()}});
    }
  } else if (const auto* am = std::get_if<AdviceMsg>(&msg.payload.body)) {
    const Advice& a = am->advice;
    const auto* plan = std::get_if<MigrationPlan>(&a.decision);
    if (!plan) return;
    const auto& job = sim_.job(a.job_id);
    if ((job.state.status != JobStatus::Running && job.state.status != JobStatus::Failed) ||
        job.config.resource_id != plan->source_resource) {
      sim_.log("advice_ignored", Json{{"consult_id", a.consult_id}, {"job", a.job_id}, {"reason", "job moved or finished"}});
      return;
    }
    // a tuning may have landed after the snapshot was taken
    if (job.last_tuned_at && sim_.now() - *job.last_tuned_at < sim_.params().quiesce_window()) {
      sim_.log("advice_ignored", Json{{"consult_id", a.consult_id}, {"job", a.job_id}, {"reason", "tuning quiesce"}});
      return;
    }
    auto& mem = state_.memory[a.job_id];
    mem.migrating = true;
    mem.last_migration = sim_.now();
    attempted_[a.consult_id] = plan->target_resource;
    sim_.execute_migration(*plan);
  } else if (const auto* n = std::get_if<JobNotice>(&msg.payload.body)) {
    auto& mem = state_.memory[n->job_id];
    switch (n->kind) {
      case JobNotice::Kind::Done:
        mem.migrating = false;
        sim_.kernel_.send(me, agent_id::controller,
                          Message{JobDoneReport{n->job_id, n->at, state_.jobs.at(n->job_id).deadline_promise}});
        break;
      case JobNotice::Kind::Resumed:
        mem.migrating = false;
        break;
      case JobNotice::Kind::TargetUnavailable:
        mem.migrating = false;
        if (last_warning_ && !retries_.count(n->consult_id) && attempted_.count(n->consult_id))
          consult(*last_warning_, attempted_.at(n->consult_id));
        break;
    }
  }
}

inline void JemActor::on_timer(const std::string& tag) {
  if (tag != "deadline") return;
  for (const auto& [id, job] : state_.jobs) {
    if (sim_.job(id).state.status == JobStatus::Done) continue;
    // Deadline passed unfinished: report the violation; a later completion is not re-audited.
    sim_.kernel_.send(state_.agent_id, agent_id::controller, Message{JobDoneReport{id, std::nullopt, job.deadline_promise}});
  }
}

inline void ControllerActor::advise(const ConsultRequest& req, std::variant<MigrationPlan, Stay> decision) {
  if (const auto* plan = std::get_if<MigrationPlan>(&decision)) {
    sim_.log("plan", to_log(*plan));
  } else {
    sim_.log("stay", Json{{"consult_id", req.id}, {"job", req.job_id}, {"reason", std::get<Stay>(decision).reason}});
  }
  sim_.kernel_.send(agent_id::controller, req.jem_id, Message{AdviceMsg{Advice{req.id, req.job_id, std::move(decision)}}});
}

inline void ControllerActor::on_message(const SimMessage& msg) {
  const std::string& me = agent_id::controller;
  if (const auto* cm = std::get_if<ConsultMsg>(&msg.payload.body)) {
    const ConsultRequest& req = cm->request;
    if (!sim_.params().migration_enabled) return advise(req, Stay{"migration disabled"});
    Pending p{req, gsas_.size(), {}};
    pending_[req.id] = std::move(p);
    for (const auto& g : gsas_) {
      sim_.log("query", Json{{"consult_id", req.id}, {"gsa", g},
                             {"min_processors", req.requirement.min_processors},
                             {"memory_need", req.requirement.memory_need}});
      sim_.kernel_.send(me, g, Message{LoadQuery{req.id, req.requirement}});
    }
  } else if (const auto* lr = std::get_if<LoadReply>(&msg.payload.body)) {
    auto it = pending_.find(lr->consult_id);
    if (it == pending_.end()) return;
    Pending& p = it->second;
    p.candidates.insert(p.candidates.end(), lr->statuses.begin(), lr->statuses.end());
    if (--p.awaiting > 0) return;
    std::sort(p.candidates.begin(), p.candidates.end(),
              [](const ResourceStatus& a, const ResourceStatus& b) { return a.resource_id < b.resource_id; });
    const ConsultRequest req = p.request;
    std::vector<ResourceStatus> eligible;
    for (const auto& c : p.candidates)
      if (std::find(req.excluded.begin(), req.excluded.end(), c.resource_id) == req.excluded.end()) eligible.push_back(c);
    const auto chosen = select_resource(eligible, req.requirement, req.snapshot.config.resource_id);
    Json ids = Json::array();
    for (const auto& c : p.candidates) ids.push_back(c.resource_id);
    sim_.log("select", Json{{"consult_id", req.id}, {"job", req.job_id}, {"candidates", std::move(ids)},
                            {"chosen", chosen ? Json(*chosen) : Json(nullptr)}});
    std::variant<MigrationPlan, Stay> decision = Stay{"no candidate resource"};
    if (chosen) {
      const auto& target = *std::find_if(p.candidates.begin(), p.candidates.end(),
                                         [&](const ResourceStatus& s) { return s.resource_id == *chosen; });
      decision = plan_migration(req.snapshot, target, sim_.params(), sim_.now(), req.id);
    }
    pending_.erase(it);
    advise(req, std::move(decision));
  } else if (const auto* d = std::get_if<JobDoneReport>(&msg.payload.body)) {
    if (!d->deadline) return;
    AuditRecord a;
    a.job_id = d->job_id;
    a.promise = *d->deadline;
    a.actual = d->completed_at;
    a.kept = a.actual && *a.actual <= a.promise;
    if (a.actual && !a.kept) return;  // violation already reported at the deadline
    a.registered_by = me;
    a.at = sim_.now();
    sim_.kernel_.send(me, agent_id::ga, Message{RegisterMsg{a}});
  }
}

inline void WorldActor::on_timer(const std::string& tag) {
  if (tag.rfind("bg:", 0) == 0) {
    const auto last = tag.rfind(':');
    const std::string node = tag.substr(3, last - 3);
    const std::size_t k = std::stoul(tag.substr(last + 1));
    const NodeSpec* spec = nullptr;
    for (const auto& s : sim_.spec_.topology.sites)
      for (const auto& r : s.resources)
        for (const auto& n : r.nodes)
          if (n.id == node) spec = &n;
    const double load = spec->background_schedule[k].load;
    sim_.node_rt(node).scheduled_background = load;
    sim_.set_background(node, load);
    sim_.log("background", Json{{"node", node}, {"load", load}});
  } else if (tag.rfind("fault:", 0) == 0) {
    const auto& f = sim_.spec_.faults[std::stoul(tag.substr(6))];
    sim_.set_health(f.resource_id, f.healthy);
  }
}

}  // namespace detail
}  // namespace gridtune
