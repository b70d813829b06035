#pragma once

// Envelopes exchanged along NA -> RA -> GSA -> (JEM / JobController / GA),
// plus their log renderings.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gridtune/grid_model.hpp"
#include "gridtune/sim_kernel.hpp"

namespace gridtune {

enum class ProblemClass { LocallyTunable, ResourceLimitation, Fault, Overload };
enum class ActionHint { None, IncreaseThreads, ChangeScheduling };
enum class Severity { Info = 0, Warn = 1, Critical = 2 };

inline std::string_view to_string(ProblemClass c) {
  switch (c) {
    case ProblemClass::LocallyTunable: return "LocallyTunable";
    case ProblemClass::ResourceLimitation: return "ResourceLimitation";
    case ProblemClass::Fault: return "Fault";
    case ProblemClass::Overload: return "Overload";
  }
  return "?";
}

inline std::string_view to_string(ActionHint h) {
  switch (h) {
    case ActionHint::None: return "None";
    case ActionHint::IncreaseThreads: return "IncreaseThreads";
    case ActionHint::ChangeScheduling: return "ChangeScheduling";
  }
  return "?";
}

inline std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "Info";
    case Severity::Warn: return "Warn";
    case Severity::Critical: return "Critical";
  }
  return "?";
}

struct Finding {
  std::string id;
  SimTime at = 0.0;
  std::string source;
  std::optional<std::string> job_id;
  std::string node_id;
  std::string resource_id;
  ProblemClass problem = ProblemClass::LocallyTunable;
  ActionHint hint = ActionHint::None;
  int thread_limit = 0;  // IncreaseThreads: most threads the job may take
  std::map<std::string, double> evidence;
};

struct Warning {
  std::string id;
  Finding finding;
  Severity severity = Severity::Warn;
  std::string target;
};

struct NodeJob {
  std::string job_id;
  int threads = 1;
  double progress = 0.0;
  double predicted_finish = 0.0;  // sim time; +inf when stalled
};

struct NodeStatus {
  std::string node_id;
  int processors = 1;
  int free_processors = 0;
  double speed = 1.0;
  double background_load = 0.0;
  double memory = 0.0;
  double cpu_usage = 0.0;
  SimTime last_heartbeat = 0.0;
  std::vector<NodeJob> jobs;
};

struct JobProgress {
  std::string job_id;
  double progress = 0.0;
  double predicted_finish = 0.0;
};

struct ResourceStatus {
  std::string resource_id;
  double load = 0.0;
  int free_processors = 0;
  int total_processors = 0;
  double memory = 0.0;  // largest single-node memory
  bool healthy = true;
  SimTime last_heartbeat = 0.0;
  SimTime reported_at = 0.0;
  std::vector<JobProgress> per_job;
  std::vector<NodeStatus> nodes;
};

struct SiteSummary {
  std::string site_id;
  std::vector<ResourceStatus> statuses;
  std::vector<std::string> faults;
  std::vector<std::string> overloaded;
};

struct AuditRecord {
  std::string job_id;
  SimTime promise = 0.0;           // deadline
  std::optional<SimTime> actual;   // completion time; empty for a violation event
  bool kept = false;
  std::string registered_by;
  SimTime at = 0.0;
};

struct Requirement {
  int min_processors = 1;
  double memory_need = 0.0;
};

struct TuningAction {
  enum class Kind { SetThreads, SetScheduling };
  Kind kind = Kind::SetThreads;
  int threads = 1;
  Scheduling scheduling = Scheduling::Dynamic;
  std::string job_id;
  SimTime issued_at = 0.0;
};

struct MigrationPlan {
  std::string consult_id;
  std::string job_id;
  std::string source_resource;
  std::string source_node;
  std::string target_resource;
  std::string target_node;
  int threads = 1;
  double checkpoint_progress = 0.0;
  double transfer_overhead = 0.0;
  SimTime decided_at = 0.0;
  double source_remaining = 0.0;
  double target_remaining = 0.0;
  double predicted_gain = 0.0;
};

struct Stay {
  std::string reason;
};

// What the JEM knows about its job when it asks for advice.
struct JobSnapshot {
  Job job;
  JobConfig config;
  double progress = 0.0;
  JobStatus status = JobStatus::Running;
  Node source_node;
  double source_background = 0.0;
  bool source_healthy = true;
  std::optional<SimTime> last_tuned_at;
};

struct ConsultRequest {
  std::string id;
  std::string job_id;
  std::string jem_id;
  Requirement requirement;
  Warning warning;
  JobSnapshot snapshot;
  bool retry = false;
  std::vector<std::string> excluded;  // resources not to pick again
};

struct Advice {
  std::string consult_id;
  std::string job_id;
  std::variant<MigrationPlan, Stay> decision;
};

// Wire messages

struct NodeReport {
  NodeStatus status;
};

struct StatusReport {
  ResourceStatus status;
  std::vector<Finding> findings;  // cluster-level findings of the RA
};

struct WarningMsg {
  Warning warning;
};

struct ConsultMsg {
  ConsultRequest request;
};

struct LoadQuery {
  std::string consult_id;
  Requirement requirement;
};

struct LoadReply {
  std::string consult_id;
  std::string site_id;
  std::vector<ResourceStatus> statuses;
};

struct AdviceMsg {
  Advice advice;
};

struct JobNotice {
  enum class Kind { Done, Resumed, TargetUnavailable };
  Kind kind = Kind::Done;
  std::string job_id;
  SimTime at = 0.0;
  std::string consult_id;
};

struct JobDoneReport {
  std::string job_id;
  std::optional<SimTime> completed_at;  // empty: deadline passed unfinished
  std::optional<SimTime> deadline;
};

struct RegisterMsg {
  std::variant<Finding, AuditRecord> record;
};

struct Message {
  std::variant<NodeReport, StatusReport, WarningMsg, ConsultMsg, LoadQuery, LoadReply, AdviceMsg, JobNotice,
               JobDoneReport, RegisterMsg>
      body;
};

// --- log rendering ---------------------------------------------------------

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_log(const Finding& f) {
  Json j = Json::object();
  j["id"] = f.id;
  j["at"] = f.at;
  j["source"] = f.source;
  j["job"] = f.job_id ? Json(*f.job_id) : Json(nullptr);
  j["node"] = f.node_id;
  j["resource"] = f.resource_id;
  j["class"] = to_string(f.problem);
  j["hint"] = to_string(f.hint);
  j["thread_limit"] = f.thread_limit;
  Json ev = Json::object();
  for (const auto& [k, v] : f.evidence) ev[k] = finite_or_null(v);
  j["evidence"] = std::move(ev);
  return j;
}

inline Json to_log(const Warning& w) {
  return Json{{"id", w.id},
              {"finding_id", w.finding.id},
              {"class", to_string(w.finding.problem)},
              {"job", w.finding.job_id ? Json(*w.finding.job_id) : Json(nullptr)},
              {"resource", w.finding.resource_id},
              {"severity", to_string(w.severity)},
              {"target", w.target}};
}

inline Json to_log(const ResourceStatus& s) {
  Json jobs = Json::array();
  for (const auto& p : s.per_job)
    jobs.push_back(Json{{"job", p.job_id}, {"progress", p.progress}, {"finish", finite_or_null(p.predicted_finish)}});
  return Json{{"resource", s.resource_id},       {"load", s.load},
              {"free_processors", s.free_processors}, {"total_processors", s.total_processors},
              {"healthy", s.healthy},            {"last_heartbeat", s.last_heartbeat},
              {"per_job", std::move(jobs)}};
}

inline Json to_log(const AuditRecord& a) {
  return Json{{"job", a.job_id},
              {"promise", a.promise},
              {"actual", a.actual ? Json(*a.actual) : Json(nullptr)},
              {"kept", a.kept},
              {"registered_by", a.registered_by},
              {"at", a.at}};
}

inline Json to_log(const MigrationPlan& p) {
  return Json{{"consult_id", p.consult_id},
              {"job", p.job_id},
              {"source", {{"resource", p.source_resource}, {"node", p.source_node}}},
              {"target", {{"resource", p.target_resource}, {"node", p.target_node}}},
              {"threads", p.threads},
              {"checkpoint_progress", p.checkpoint_progress},
              {"transfer_overhead", p.transfer_overhead},
              {"decided_at", p.decided_at},
              {"source_remaining", finite_or_null(p.source_remaining)},
              {"target_remaining", p.target_remaining},
              {"predicted_gain", finite_or_null(p.predicted_gain)}};
}

inline std::string log_type(const Message& m) {
  return std::visit(
      [](const auto& b) -> std::string {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, NodeReport>) return "NodeReport";
        else if constexpr (std::is_same_v<T, StatusReport>) return "StatusReport";
        else if constexpr (std::is_same_v<T, WarningMsg>) return "Warning";
        else if constexpr (std::is_same_v<T, ConsultMsg>) return "ConsultRequest";
        else if constexpr (std::is_same_v<T, LoadQuery>) return "LoadQuery";
        else if constexpr (std::is_same_v<T, LoadReply>) return "LoadReply";
        else if constexpr (std::is_same_v<T, AdviceMsg>) return "Advice";
        else if constexpr (std::is_same_v<T, JobNotice>) return "JobNotice";
        else if constexpr (std::is_same_v<T, JobDoneReport>) return "JobDone";
        else return "Register";
      },
      m.body);
}

inline Json log_fields(const Message& m) {
  return std::visit(
      [](const auto& b) -> Json {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, NodeReport>) {
          const auto& s = b.status;
          return Json{{"node", s.node_id},
                      {"cpu_usage", s.cpu_usage},
                      {"free_processors", s.free_processors},
                      {"background", s.background_load},
                      {"last_heartbeat", s.last_heartbeat},
                      {"jobs", s.jobs.size()}};
        } else if constexpr (std::is_same_v<T, StatusReport>) {
          Json j = to_log(b.status);
          Json fs = Json::array();
          for (const auto& f : b.findings) fs.push_back(f.id);
          j["findings"] = std::move(fs);
          return j;
        } else if constexpr (std::is_same_v<T, WarningMsg>) {
          return to_log(b.warning);
        } else if constexpr (std::is_same_v<T, ConsultMsg>) {
          return Json{{"id", b.request.id},
                      {"job", b.request.job_id},
                      {"warning_id", b.request.warning.id},
                      {"retry", b.request.retry},
                      {"excluded", b.request.excluded}};
        } else if constexpr (std::is_same_v<T, LoadQuery>) {
          return Json{{"consult_id", b.consult_id},
                      {"min_processors", b.requirement.min_processors},
                      {"memory_need", b.requirement.memory_need}};
        } else if constexpr (std::is_same_v<T, LoadReply>) {
          Json ids = Json::array();
          for (const auto& s : b.statuses) ids.push_back(s.resource_id);
          return Json{{"consult_id", b.consult_id}, {"site", b.site_id}, {"resources", std::move(ids)}};
        } else if constexpr (std::is_same_v<T, AdviceMsg>) {
          const auto& a = b.advice;
          if (const auto* plan = std::get_if<MigrationPlan>(&a.decision))
            return Json{{"consult_id", a.consult_id}, {"job", a.job_id}, {"advice", "Migrate"},
                        {"target", plan->target_resource}};
          return Json{{"consult_id", a.consult_id}, {"job", a.job_id}, {"advice", "Stay"},
                      {"reason", std::get<Stay>(a.decision).reason}};
        } else if constexpr (std::is_same_v<T, JobNotice>) {
          return Json{{"job", b.job_id},
                      {"kind", b.kind == JobNotice::Kind::Done      ? "Done"
                               : b.kind == JobNotice::Kind::Resumed ? "Resumed"
                                                                    : "TargetUnavailable"},
                      {"at", b.at}};
        } else if constexpr (std::is_same_v<T, JobDoneReport>) {
          return Json{{"job", b.job_id},
                      {"completed_at", b.completed_at ? Json(*b.completed_at) : Json(nullptr)},
                      {"deadline", b.deadline ? Json(*b.deadline) : Json(nullptr)}};
        } else {
          if (const auto* f = std::get_if<Finding>(&b.record)) return Json{{"finding_id", f->id}};
          return Json{{"audit", to_log(std::get<AuditRecord>(b.record))}};
        }
      },
      m.body);
}

}  // namespace gridtune
