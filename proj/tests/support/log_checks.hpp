#pragma once

// Event-log pattern checks shared by unit and acceptance tests.

#include <map>
#include <string>
#include <vector>

#include "gridtune/simulation.hpp"

namespace gridtune::testing {

inline std::vector<Json> records_of(const EventLog& log, const std::string& type) {
  std::vector<Json> out;
  for (const auto& r : log.records())
    if (r["type"] == type) out.push_back(r);
  return out;
}

inline std::size_t count_of(const EventLog& log, const std::string& type) { return records_of(log, type).size(); }

// Every migration_start must follow, in log order:
//   NA ResourceLimitation/Fault finding for the job
//   -> GSA warning wrapping that finding, addressed to the job's JEM
//   -> JEM consult citing that warning (or a retry citing it)
//   -> JobController query for the consult
//   -> select for the consult
//   -> plan for the consult.
// Returns one message per violation.
inline std::vector<std::string> protocol_violations(const EventLog& log) {
  std::map<std::string, std::size_t> finding_at;         // finding id -> n
  std::map<std::string, std::string> finding_job;        // finding id -> job
  std::map<std::string, std::size_t> gsa_warning_at;     // warning id -> n
  std::map<std::string, std::string> warning_finding;    // warning id -> finding id
  std::map<std::string, std::size_t> consult_at;
  std::map<std::string, std::string> consult_warning;
  std::map<std::string, std::size_t> query_at, select_at, plan_at;
  std::vector<std::string> out;

  for (const auto& r : log.records()) {
    const auto n = r["n"].get<std::size_t>();
    const auto type = r["type"].get<std::string>();
    if (type == "finding") {
      const auto cls = r["class"].get<std::string>();
      if (r["source"].get<std::string>().rfind("na:", 0) == 0 && (cls == "ResourceLimitation" || cls == "Fault") &&
          r["job"].is_string()) {
        finding_at[r["id"]] = n;
        finding_job[r["id"]] = r["job"];
      }
    } else if (type == "warning") {
      if (r["from"].get<std::string>().rfind("gsa:", 0) == 0 && r["target"].get<std::string>().rfind("jem:", 0) == 0) {
        gsa_warning_at[r["id"]] = n;
        warning_finding[r["id"]] = r["finding_id"];
      }
    } else if (type == "consult") {
      consult_at[r["id"]] = n;
      consult_warning[r["id"]] = r["warning_id"];
    } else if (type == "query") {
      query_at.try_emplace(r["consult_id"], n);
    } else if (type == "select") {
      select_at.try_emplace(r["consult_id"], n);
    } else if (type == "plan") {
      plan_at.try_emplace(r["consult_id"], n);
    } else if (type == "migration_start") {
      const std::string job = r["job"];
      const std::string c = r["consult_id"];
      auto fail = [&](const std::string& why) { out.push_back("migration n=" + std::to_string(n) + " of " + job + ": " + why); };
      if (!plan_at.count(c)) { fail("no plan for consult " + c); continue; }
      if (!select_at.count(c) || select_at[c] > plan_at[c]) { fail("no select before plan"); continue; }
      if (!query_at.count(c) || query_at[c] > select_at[c]) { fail("no query before select"); continue; }
      if (!consult_at.count(c) || consult_at[c] > query_at[c]) { fail("no consult before query"); continue; }
      const std::string w = consult_warning[c];
      if (!gsa_warning_at.count(w) || gsa_warning_at[w] > consult_at[c]) { fail("consult not caused by a GSA warning"); continue; }
      const std::string f = warning_finding[w];
      if (!finding_at.count(f) || finding_at[f] > gsa_warning_at[w]) { fail("GSA warning not caused by an NA finding"); continue; }
      if (finding_job[f] != job) fail("finding concerns another job");
    }
  }
  return out;
}

// Completed moves only; a refused transfer leaves the job where it was.
inline std::vector<double> migration_times(const EventLog& log, const std::string& job) {
  std::vector<double> out;
  for (const auto& r : log.records())
    if (r["type"] == "migration_end" && r["job"] == job) out.push_back(r["t"].get<double>());
  return out;
}

}  // namespace gridtune::testing
