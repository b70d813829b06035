#pragma once

// Post-run artifacts: JSONL event log, CSV metric trace, JSON audit report and
// a per-job summary, plus the comparison table built from several runs.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridtune/error.hpp"
#include "gridtune/monitoring.hpp"
#include "gridtune/simulation.hpp"

namespace gridtune {

struct JobSummary {
  std::string job_id;
  std::string status;
  std::optional<SimTime> completion;
  double progress = 0.0;
  double total_work = 0.0;
  double logged_work = 0.0;
  int tunings = 0;
  int migrations = 0;

  bool operator==(const JobSummary&) const = default;
};

struct RunSummary {
  std::string label;
  std::uint64_t seed = 0;
  SimTime end_time = 0.0;
  std::vector<JobSummary> jobs;

  const JobSummary* job(const std::string& id) const {
    for (const auto& j : jobs)
      if (j.job_id == id) return &j;
    return nullptr;
  }
  bool operator==(const RunSummary&) const = default;
};

inline RunSummary summarize(const RunResult& r, std::string label, std::uint64_t seed) {
  RunSummary s{std::move(label), seed, r.end_time, {}};
  for (const auto& j : r.jobs)
    s.jobs.push_back(JobSummary{j.job_id, std::string(to_string(j.status)), j.completed_at, j.progress, j.total_work,
                                j.logged_work, j.tunings, j.migrations});
  return s;
}

inline Json to_json(const RunSummary& s) {
  Json jobs = Json::array();
  for (const auto& j : s.jobs)
    jobs.push_back(Json{{"job", j.job_id},
                        {"status", j.status},
                        {"completion", j.completion ? Json(*j.completion) : Json(nullptr)},
                        {"progress", j.progress},
                        {"total_work", j.total_work},
                        {"logged_work", j.logged_work},
                        {"tunings", j.tunings},
                        {"migrations", j.migrations}});
  return Json{{"label", s.label}, {"seed", s.seed}, {"end_time", s.end_time}, {"jobs", std::move(jobs)}};
}

inline RunSummary summary_from_json(const Json& j) {
  try {
    RunSummary s;
    s.label = j.at("label").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.end_time = j.at("end_time").get<double>();
    for (const auto& e : j.at("jobs")) {
      JobSummary js;
      js.job_id = e.at("job").get<std::string>();
      js.status = e.at("status").get<std::string>();
      if (!e.at("completion").is_null()) js.completion = e.at("completion").get<double>();
      js.progress = e.at("progress").get<double>();
      js.total_work = e.at("total_work").get<double>();
      js.logged_work = e.at("logged_work").get<double>();
      js.tunings = e.at("tunings").get<int>();
      js.migrations = e.at("migrations").get<int>();
      s.jobs.push_back(std::move(js));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("summary", e.what());
  }
}

inline Json to_json(const AuditReport& a) {
  Json promises = Json::array();
  for (const auto& p : a.promises) promises.push_back(to_log(p));
  Json resources = Json::array();
  for (const auto& t : a.per_resource)
    resources.push_back(
        Json{{"resource", t.resource_id}, {"faults", t.faults}, {"overloads", t.overloads}, {"limitations", t.limitations}});
  return Json{{"findings", a.findings},  {"audit_records", a.audit_records}, {"kept", a.kept},
              {"broken", a.broken},      {"promises", std::move(promises)},  {"resources", std::move(resources)}};
}

inline std::string render_audit(const AuditReport& a) {
  std::ostringstream out;
  out << "findings registered: " << a.findings << "\n";
  out << "promises: " << a.audit_records << " (kept " << a.kept << ", broken " << a.broken << ")\n";
  if (!a.per_resource.empty()) {
    out << std::left << std::setw(16) << "resource" << std::right << std::setw(8) << "faults" << std::setw(11)
        << "overloads" << std::setw(13) << "limitations" << "\n";
    for (const auto& t : a.per_resource)
      out << std::left << std::setw(16) << t.resource_id << std::right << std::setw(8) << t.faults << std::setw(11)
          << t.overloads << std::setw(13) << t.limitations << "\n";
  }
  for (const auto& p : a.promises)
    out << "  " << p.job_id << ": promise " << format_double(p.promise) << ", actual "
        << (p.actual ? format_double(*p.actual) : std::string("-")) << (p.kept ? "  kept" : "  BROKEN") << "\n";
  return out.str();
}

// --- event log schema --------------------------------------------------------

// Required fields per record type, checked after the common n/t/type prefix.
inline const std::map<std::string, std::vector<std::string>>& log_schema() {
  static const std::map<std::string, std::vector<std::string>> schema = {
      {"send", {"from", "to", "deliver_at", "msg", "body"}},
      {"deliver", {"from", "to", "msg"}},
      {"timer", {"agent", "tag"}},
      {"job_phase", {"job", "kind"}},
      {"job_start", {"job", "resource", "node", "threads", "scheduling", "status"}},
      {"job_done", {"job", "completion", "total_work", "logged_work", "tunings", "migrations"}},
      {"finding", {"id", "at", "source", "job", "node", "resource", "class", "hint"}},
      {"warning", {"id", "finding_id", "class", "severity", "target", "from"}},
      {"warning_suppressed", {"warning_id", "job"}},
      {"warning_ignored", {"warning_id", "reason"}},
      {"consult", {"id", "job", "warning_id", "retry"}},
      {"query", {"consult_id", "gsa"}},
      {"select", {"consult_id", "job", "candidates", "chosen"}},
      {"plan", {"consult_id", "job", "source", "target", "threads"}},
      {"stay", {"consult_id", "job", "reason"}},
      {"advice_ignored", {"consult_id", "job", "reason"}},
      {"migration_start", {"job", "consult_id", "source", "target", "checkpoint_progress", "transfer_overhead"}},
      {"migration_end", {"job", "consult_id", "resource", "node", "threads"}},
      {"target_unavailable", {"job", "consult_id", "target", "reason"}},
      {"tuning", {"job", "node", "action", "threads_before", "threads_after"}},
      {"tuning_rejected", {"job", "finding_id", "reason"}},
      {"register", {"from"}},
      {"background", {"node", "load"}},
      {"resource_health", {"resource", "healthy"}},
      {"sample_drop", {"node", "at", "kind"}},
  };
  return schema;
}

// Empty string when the record conforms, otherwise the first problem found.
inline std::string check_log_record(const Json& rec, std::size_t expected_n) {
  if (!rec.is_object()) return "record is not an object";
  auto it = rec.begin();
  const char* prefix[] = {"n", "t", "type"};
  for (const char* key : prefix) {
    if (it == rec.end() || it.key() != key) return std::string("expected key '") + key + "' in position";
    ++it;
  }
  if (!rec["n"].is_number_unsigned() || rec["n"].get<std::size_t>() != expected_n) return "bad sequence number";
  if (!rec["t"].is_number() || rec["t"].get<double>() < 0.0) return "bad time";
  if (!rec["type"].is_string()) return "type is not a string";
  const auto& schema = log_schema();
  const auto found = schema.find(rec["type"].get<std::string>());
  if (found == schema.end()) return "unknown record type '" + rec["type"].get<std::string>() + "'";
  for (const auto& key : found->second)
    if (!rec.contains(key)) return "'" + found->first + "' record lacks '" + key + "'";
  return {};
}

// --- artifacts ---------------------------------------------------------------

struct RunArtifacts {
  std::filesystem::path dir;
  std::filesystem::path events;
  std::filesystem::path metrics;
  std::filesystem::path audit;
  std::filesystem::path summary_path;
  RunSummary summary;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
  out << content;
  out.close();
  if (!out) throw Error(Errc::IoError, "write failed for '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunArtifacts paths_in(const std::filesystem::path& dir) {
  return RunArtifacts{dir, dir / "events.jsonl", dir / "metrics.csv", dir / "audit.json", dir / "summary.json", {}};
}

}  // namespace detail

inline RunArtifacts export_trace(const RunResult& result, const std::filesystem::path& out_dir,
                                 const std::string& label = "run", std::uint64_t seed = 0) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create '" + out_dir.string() + "': " + ec.message());
  RunArtifacts a = detail::paths_in(out_dir);
  a.summary = summarize(result, label, seed);

  detail::write_file(a.events, result.log.to_jsonl());
  std::ostringstream csv;
  write_metrics_csv(csv, result.samples);
  detail::write_file(a.metrics, csv.str());
  detail::write_file(a.audit, to_json(result.audit).dump(2) + "\n");
  detail::write_file(a.summary_path, to_json(a.summary).dump(2) + "\n");
  return a;
}

// Reads a run directory back, checking every file parses.
inline RunArtifacts load_artifacts(const std::filesystem::path& dir) {
  RunArtifacts a = detail::paths_in(dir);
  try {
    a.summary = summary_from_json(Json::parse(detail::read_file(a.summary_path)));
    if (!Json::parse(detail::read_file(a.audit)).is_object()) throw ValidationError("audit", "not an object");
    std::istringstream events(detail::read_file(a.events));
    std::string line;
    std::size_t n = 0;
    while (std::getline(events, line)) {
      const std::string problem = check_log_record(Json::parse(line), n);
      if (!problem.empty()) throw ValidationError("events.jsonl:" + std::to_string(n + 1), problem);
      ++n;
    }
    (void)parse_metrics_csv(detail::read_file(a.metrics));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, dir.string() + ": " + e.what());
  }
  return a;
}

// --- comparison ----------------------------------------------------------------

struct SpeedupRow {
  std::string label;
  std::optional<SimTime> completion;
  std::optional<double> ratio;  // completion / completion of the first run
};

struct SpeedupTable {
  std::string job_id;
  std::vector<SpeedupRow> rows;
};

inline SpeedupTable compare_runs(std::span<const RunSummary> runs, const std::string& job_id) {
  SpeedupTable table{job_id, {}};
  std::optional<SimTime> reference;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const JobSummary* j = runs[i].job(job_id);
    if (!j) throw Error(Errc::MissingJob, "job '" + job_id + "' absent from run '" + runs[i].label + "'");
    if (i == 0) reference = j->completion;
    SpeedupRow row{runs[i].label, j->completion, std::nullopt};
    if (reference && j->completion && *reference > 0.0) row.ratio = *j->completion / *reference;
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::string render_table(const SpeedupTable& t) {
  std::ostringstream out;
  out << "job " << t.job_id << "\n";
  out << std::left << std::setw(28) << "run" << std::right << std::setw(16) << "completion" << std::setw(10) << "ratio"
      << "\n";
  auto fixed = [](double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
  };
  for (const auto& r : t.rows)
    out << std::left << std::setw(28) << r.label << std::right << std::setw(16)
        << (r.completion ? fixed(*r.completion, 4) : std::string("unfinished")) << std::setw(10)
        << (r.ratio ? fixed(*r.ratio, 4) : std::string("-")) << "\n";
  return out.str();
}

inline Json to_json(const SpeedupTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows)
    rows.push_back(Json{{"label", r.label},
                        {"completion", r.completion ? Json(*r.completion) : Json(nullptr)},
                        {"ratio", r.ratio ? Json(*r.ratio) : Json(nullptr)}});
  return Json{{"job", t.job_id}, {"rows", std::move(rows)}};
}

}  // namespace gridtune
