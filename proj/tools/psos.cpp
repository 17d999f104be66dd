#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "psos/checks.hpp"
#include "psos/error.hpp"
#include "psos/experiment.hpp"

using nlohmann::json;

namespace {

json load_json_arg(const std::string& arg) {
  if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) return json::parse(arg);
  std::ifstream f(arg);
  if (!f) throw psos::Error(psos::ErrorCode::IoError, "cannot read " + arg);
  return json::parse(f);
}

// "3", "0-9" and comma lists of either.
std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& tokens) {
  std::vector<std::uint64_t> out;
  for (const std::string& tok : tokens) {
    const std::size_t dash = tok.find('-');
    if (dash == std::string::npos) {
      out.push_back(std::stoull(tok));
      continue;
    }
    const std::uint64_t a = std::stoull(tok.substr(0, dash)), b = std::stoull(tok.substr(dash + 1));
    if (b < a) throw psos::Error(psos::ErrorCode::ParamOutOfRange, "empty seed range " + tok);
    for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
  }
  return out;
}

struct RunFlags {
  std::string config, task, spec, profile, out, params;
  std::optional<int> n, max_iters;
  std::optional<double> tol;
  std::vector<std::string> seeds;
};

void add_run_flags(CLI::App* app, RunFlags& f, bool with_task) {
  app->add_option("--config", f.config, "experiment config JSON file");
  if (with_task) app->add_option("--task", f.task, "synth | bipartition | colinear | checks | sweep");
  app->add_option("--spec", f.spec, "mixture spec JSON file or inline JSON");
  app->add_option("--n", f.n, "samples per seed");
  app->add_option("--seeds", f.seeds, "seeds, e.g. 0-9 or 1,5,7")->delimiter(',');
  app->add_option("--profile", f.profile, "desk | paper");
  app->add_option("--tol", f.tol, "solver tolerance");
  app->add_option("--max-iters", f.max_iters, "solver iteration cap per solve");
  app->add_option("--params", f.params, "task parameter overrides, JSON file or inline JSON");
  app->add_option("--out", f.out, "output directory");
}

psos::ExperimentConfig build_config(const RunFlags& f, const std::string& task) {
  psos::ExperimentConfig c = f.config.empty() ? psos::ExperimentConfig{} : psos::config_from_json(load_json_arg(f.config));
  if (!task.empty()) c.task = task;
  if (!f.spec.empty()) c.spec = load_json_arg(f.spec);
  if (f.n) c.n = f.n;
  if (!f.seeds.empty()) c.seeds = parse_seeds(f.seeds);
  if (c.seeds.empty()) c.seeds = {0};
  if (!f.profile.empty()) c.profile = f.profile;
  if (f.tol) c.tol = f.tol;
  if (f.max_iters) c.max_iters = f.max_iters;
  if (!f.params.empty()) c.params = load_json_arg(f.params);
  if (!f.out.empty()) c.out = f.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sum-of-squares clustering experiments for Gaussian mixtures"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "run an experiment given --task");
  add_run_flags(run, run_flags, true);

  std::vector<RunFlags> task_flags(psos::kTasks.size());
  std::vector<CLI::App*> task_apps;
  for (std::size_t i = 0; i < psos::kTasks.size(); ++i) {
    task_apps.push_back(app.add_subcommand(psos::kTasks[i], "run the " + psos::kTasks[i] + " task"));
    add_run_flags(task_apps.back(), task_flags[i], false);
  }

  std::uint64_t check_seed = 1;
  std::string check_out;
  CLI::App* paper_checks = app.add_subcommand("paper-checks", "run the lemma checks, print a JSON array of reports");
  paper_checks->add_option("--seed", check_seed, "seed for randomized checks");
  paper_checks->add_option("--out", check_out, "write the reports here instead of stdout");

  std::vector<std::string> report_inputs;
  std::string csv_path;
  CLI::App* report = app.add_subcommand("report", "tabulate summaries");
  report->add_option("summaries", report_inputs, "summary.json files or experiment directories")->required();
  report->add_option("--csv", csv_path, "CSV output path ('-' for stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const psos::ExperimentConfig c = build_config(run_flags, run_flags.task);
      return psos::run_experiment(c, psos::default_threads());
    }
    for (std::size_t i = 0; i < task_apps.size(); ++i)
      if (task_apps[i]->parsed()) return psos::run_experiment(build_config(task_flags[i], psos::kTasks[i]), psos::default_threads());
    if (paper_checks->parsed()) {
      json arr = json::array();
      bool pass = true;
      for (const psos::CheckReport& r : psos::run_all_checks(check_seed)) {
        arr.push_back(psos::to_json(r));
        pass = pass && r.pass;
      }
      if (check_out.empty()) {
        std::cout << psos::dump_json(arr);
      } else {
        const std::filesystem::path parent = std::filesystem::path(check_out).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        std::ofstream f(check_out, std::ios::binary);
        f << psos::dump_json(arr);
        if (!f) throw psos::Error(psos::ErrorCode::IoError, "cannot write " + check_out);
      }
      return pass ? 0 : 1;
    }
    if (report->parsed()) {
      const psos::Report r = psos::make_report(report_inputs);
      std::cout << r.table;
      if (csv_path == "-") {
        std::cout << r.csv;
      } else if (!csv_path.empty()) {
        std::ofstream f(csv_path, std::ios::binary);
        f << r.csv;
        if (!f) throw psos::Error(psos::ErrorCode::IoError, "cannot write " + csv_path);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
