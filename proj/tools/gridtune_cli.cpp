#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gridtune/gridtune.hpp"

namespace {

using namespace gridtune;

std::string dir_name(std::string label) {
  for (char& c : label)
    if (c == ' ' || c == '=') c = '_';
  return label;
}

void print_summary(const RunSummary& s) {
  for (const auto& j : s.jobs) {
    std::cout << "  " << j.job_id << ": " << j.status;
    if (j.completion) std::cout << " at " << format_double(*j.completion);
    std::cout << ", progress " << format_double(j.progress) << ", tunings " << j.tunings << ", migrations "
              << j.migrations << "\n";
  }
}

int run_command(const std::string& target, std::optional<std::uint64_t> seed, std::optional<double> t_end,
                const std::string& out, bool serial) {
  if (is_builtin_scenario(target)) {
    if (t_end) std::cerr << "note: --t-end is ignored for built-in scenarios\n";
    const auto result = run_scenario(target, seed.value_or(42), !serial);
    for (const auto& run : result.runs) {
      const RunSummary s = summarize(run.result, run.label, run.spec.seed);
      std::cout << run.label << "\n";
      print_summary(s);
      if (!out.empty()) export_trace(run.result, std::filesystem::path(out) / dir_name(run.label), run.label, run.spec.seed);
    }
    std::cout << "\n";
    Json tables = Json::array();
    for (const auto& t : result.tables) {
      std::cout << render_table(t) << "\n";
      tables.push_back(to_json(t));
    }
    if (!out.empty()) {
      std::ofstream f(std::filesystem::path(out) / "comparison.json");
      if (!f) throw Error(Errc::IoError, "cannot write comparison.json under '" + out + "'");
      f << tables.dump(2) << "\n";
    }
    return 0;
  }

  SimSpec spec = load_config_file(target);
  if (seed) spec.seed = *seed;
  if (t_end) spec.t_end = *t_end;
  validate(spec);
  const RunResult result = Simulation(spec).run();
  const RunSummary s = summarize(result, std::filesystem::path(target).stem().string(), spec.seed);
  std::cout << s.label << " (seed " << spec.seed << ", " << result.log.size() << " log records)\n";
  print_summary(s);
  std::cout << render_audit(result.audit);
  if (!out.empty()) export_trace(result, out, s.label, spec.seed);
  return 0;
}

int compare_command(const std::vector<std::string>& dirs, const std::string& job) {
  std::vector<RunSummary> runs;
  for (const auto& d : dirs) runs.push_back(load_artifacts(d).summary);
  std::cout << render_table(compare_runs(runs, job));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridtune: multi-agent grid performance tuning and migration simulator"};
  app.require_subcommand(1);

  std::string target, out, job, path, name;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_end;
  bool serial = false;
  std::vector<std::string> dirs;

  auto* run = app.add_subcommand("run", "run a config file or a built-in scenario (scenario1, scenario2)");
  run->add_option("target", target, "config path or scenario name")->required();
  run->add_option("--seed", seed, "override the seed");
  run->add_option("--t-end", t_end, "override the simulation horizon");
  run->add_option("--out", out, "directory for events.jsonl, metrics.csv, audit.json, summary.json");
  run->add_flag("--serial", serial, "run counterfactual runs one after another");

  auto* compare = app.add_subcommand("compare", "compare completion times of exported runs");
  compare->add_option("dirs", dirs, "run directories; ratios are relative to the first")->required();
  compare->add_option("--job", job, "job id")->required();

  auto* check = app.add_subcommand("validate", "check a config file");
  check->add_option("path", path)->required();

  auto* show = app.add_subcommand("spec", "print the config of a built-in scenario");
  show->add_option("name", name)->required();
  show->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return run_command(target, seed, t_end, out, serial);
    if (*compare) return compare_command(dirs, job);
    if (*check) {
      const SimSpec spec = load_config_file(path);
      std::cout << path << ": ok (" << spec.jobs.size() << " jobs, " << spec.topology.sites.size() << " sites)\n";
      return 0;
    }
    if (*show) {
      std::cout << render_config(builtin_spec(name, seed.value_or(42)));
      return 0;
    }
  } catch (const Error& e) {
    // what() already names the code, and the path or line
    std::cerr << "gridtune: " << e.what() << "\n";
    return e.code() == Errc::ValidationError || e.code() == Errc::ParseError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
