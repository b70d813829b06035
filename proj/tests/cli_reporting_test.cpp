#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gridtune/reporting.hpp"
#include "gridtune/scenarios.hpp"
#include "gridtune/sim_spec.hpp"
#include "support/random_spec.hpp"

using namespace gridtune;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "topology": {"sites": [{"id": "s", "resources": [
    {"id": "smp", "kind": "SMP", "nodes": [{"id": "n0", "processors": 2}]}]}]},
  "jobs": [{"id": "job1", "total_work": 100, "serial_fraction": 0.1,
            "placement": {"resource": "smp", "node": "n0", "threads": 1}}],
  "t_end": 200
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gridtune_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

RunSummary summary_with(const std::string& label, std::optional<double> completion, const std::string& job = "job1") {
  RunSummary s;
  s.label = label;
  JobSummary j;
  j.job_id = job;
  j.completion = completion;
  s.jobs.push_back(j);
  return s;
}

}  // namespace

TEST(Config, MinimalParses) {
  const SimSpec s = parse_config(kMinimal);
  ASSERT_EQ(s.topology.sites.size(), 1u);
  ASSERT_EQ(s.jobs.size(), 1u);
  EXPECT_EQ(s.jobs[0].job.total_work, 100.0);
  EXPECT_EQ(s.jobs[0].placement.threads, 1);
  EXPECT_EQ(s.t_end, 200.0);
  EXPECT_EQ(s.params, AgentParams{});
}

TEST(Config, SerialFractionOutOfRange) {
  std::string text = kMinimal;
  text.replace(text.find("0.1"), 3, "1.5");
  try {
    parse_config(text);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(e.path().find("serial_fraction"), std::string::npos);
  }
}

TEST(Config, UnknownKeyNamed) {
  std::string text = kMinimal;
  text.replace(text.find("\"t_end\""), 0, "\"foo\": 1, ");
  try {
    parse_config(text);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("foo"), std::string::npos);
  }
}

TEST(Config, SyntaxErrorCarriesLine) {
  try {
    parse_config("{\n\"t_end\": 1,\n,}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Config, RenderParseRoundTrip) {
  gridtune::testing::SpecGenerator gen(5);
  for (int i = 0; i < 100; ++i) {
    const SimSpec s = gen.next();
    EXPECT_EQ(parse_config(render_config(s)), s) << i;
  }
}

TEST(Config, SampleFilesLoad) {
  EXPECT_NO_THROW(load_config_file(std::string(GRIDTUNE_CONFIG_DIR) + "/two_site.json"));
  EXPECT_THROW(load_config_file(std::string(GRIDTUNE_CONFIG_DIR) + "/invalid_serial_fraction.json"), ValidationError);
  EXPECT_EQ(load_config_file(std::string(GRIDTUNE_CONFIG_DIR) + "/scenario1.json"), scenario1_spec(42));
  EXPECT_EQ(load_config_file(std::string(GRIDTUNE_CONFIG_DIR) + "/scenario2.json"), builtin_spec("scenario2", 42));
}

TEST(Scenarios, ScenarioOneTunedBeatsUntouched) {
  const auto r = run_scenario("scenario1");
  ASSERT_EQ(r.runs.size(), 2u);
  ASSERT_EQ(r.tables.size(), 1u);
  const auto& rows = r.tables[0].rows;
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].label, "tuned");
  EXPECT_NEAR(*rows[0].completion, 55.45, 1e-9);
  EXPECT_NEAR(*rows[1].completion, 100.0, 1e-9);
  EXPECT_DOUBLE_EQ(*rows[0].ratio, 1.0);
}

TEST(Scenarios, ScenarioTwoHasOneTablePerSize) {
  const auto r = run_scenario("scenario2");
  ASSERT_EQ(r.tables.size(), 3u);
  for (const auto& t : r.tables) {
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_LT(*t.rows[0].completion, *t.rows[1].completion);
    EXPECT_LT(*t.rows[1].completion, *t.rows[2].completion);
  }
}

TEST(Scenarios, Unknown) {
  try {
    run_scenario("scenario9");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownScenario);
  }
}

TEST(Scenarios, SerialAndParallelAgree) {
  const auto a = run_scenario("scenario1", 42, false), b = run_scenario("scenario1", 42, true);
  for (std::size_t i = 0; i < a.runs.size(); ++i)
    EXPECT_EQ(a.runs[i].result.log.to_jsonl(), b.runs[i].result.log.to_jsonl());
}

TEST(CompareRuns, RatiosAgainstFirst) {
  const RunSummary runs[] = {summary_with("a", 10.0), summary_with("b", 10.0), summary_with("c", 25.0)};
  const auto t = compare_runs(runs, "job1");
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(*t.rows[0].ratio, 1.0);
  EXPECT_DOUBLE_EQ(*t.rows[1].ratio, 1.0);
  EXPECT_DOUBLE_EQ(*t.rows[2].ratio, 2.5);
}

TEST(CompareRuns, UnfinishedHasNoRatio) {
  const RunSummary runs[] = {summary_with("a", 10.0), summary_with("b", std::nullopt)};
  const auto t = compare_runs(runs, "job1");
  EXPECT_FALSE(t.rows[1].ratio.has_value());
  EXPECT_NE(render_table(t).find("unfinished"), std::string::npos);
}

TEST(CompareRuns, MissingJob) {
  const RunSummary runs[] = {summary_with("a", 10.0), summary_with("b", 5.0, "other")};
  try {
    compare_runs(runs, "job1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingJob);
  }
}

TEST(ExportTrace, EmptyRunGivesHeaderOnlyFiles) {
  const auto dir = scratch("empty");
  const auto a = export_trace(RunResult{}, dir);
  EXPECT_EQ(slurp(a.events), "");
  EXPECT_EQ(slurp(a.metrics), "time,node,kind,value\n");
  const auto back = load_artifacts(dir);
  EXPECT_TRUE(back.summary.jobs.empty());
  fs::remove_all(dir);
}

TEST(ExportTrace, ByteIdenticalOnRepeat) {
  const auto result = Simulation(scenario1_spec(42)).run();
  const auto d1 = scratch("rep1"), d2 = scratch("rep2");
  export_trace(result, d1, "tuned", 42);
  export_trace(result, d2, "tuned", 42);
  for (const char* f : {"events.jsonl", "metrics.csv", "audit.json", "summary.json"})
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  export_trace(result, d1, "tuned", 42);
  EXPECT_EQ(slurp(d1 / "events.jsonl"), slurp(d2 / "events.jsonl"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(ExportTrace, UnwritableDirectory) {
  const auto base = scratch("blocker");
  { std::ofstream(base) << "x"; }
  try {
    export_trace(RunResult{}, base / "sub");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoError);
  }
  fs::remove(base);
}

TEST(ExportTrace, LoadBackSummaryMatches) {
  const auto result = Simulation(scenario1_spec(42)).run();
  const auto dir = scratch("load");
  const auto written = export_trace(result, dir, "tuned", 42);
  const auto back = load_artifacts(dir);
  EXPECT_EQ(to_json(back.summary), to_json(written.summary));
  EXPECT_EQ(parse_metrics_csv(slurp(back.metrics)), result.samples);
  fs::remove_all(dir);
}

TEST(ExportTrace, CorruptEventsRejected) {
  const auto dir = scratch("corrupt");
  export_trace(Simulation(scenario1_spec(42)).run(), dir);
  { std::ofstream(dir / "events.jsonl", std::ios::app) << "{\"n\":0}\n"; }
  EXPECT_THROW(load_artifacts(dir), Error);
  { std::ofstream(dir / "events.jsonl") << "not json\n"; }
  EXPECT_THROW(load_artifacts(dir), ParseError);
  fs::remove_all(dir);
}

TEST(LogSchema, EveryRecordOfFuzzedRunsConforms) {
  gridtune::testing::SpecGenerator gen(8);
  for (int i = 0; i < 30; ++i) {
    const auto r = Simulation(gen.next()).run();
    const auto& recs = r.log.records();
    for (std::size_t n = 0; n < recs.size(); ++n) {
      const auto problem = check_log_record(recs[n], n);
      EXPECT_TRUE(problem.empty()) << "spec " << i << " record " << n << ": " << problem << "\n" << recs[n].dump();
      if (!problem.empty()) break;
    }
  }
}

TEST(LogSchema, RejectsBadRecords) {
  EXPECT_FALSE(check_log_record(Json::parse(R"({"t":0,"n":0,"type":"timer","seq":0,"agent":"a","tag":"x"})"), 0).empty());
  EXPECT_FALSE(check_log_record(Json::parse(R"({"n":1,"t":0,"type":"timer","seq":0,"agent":"a","tag":"x"})"), 0).empty());
  EXPECT_FALSE(check_log_record(Json::parse(R"({"n":0,"t":0,"type":"bogus"})"), 0).empty());
  EXPECT_FALSE(check_log_record(Json::parse(R"({"n":0,"t":0,"type":"timer"})"), 0).empty());
  EXPECT_TRUE(check_log_record(Json::parse(R"({"n":0,"t":0,"type":"timer","seq":0,"agent":"a","tag":"x"})"), 0).empty());
}

TEST(Audit, RenderedTableListsResources) {
  const auto r = Simulation(scenario1_spec(42)).run();
  const auto text = render_audit(r.audit);
  EXPECT_NE(text.find("smp1"), std::string::npos);
}
