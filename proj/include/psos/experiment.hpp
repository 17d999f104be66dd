#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "psos/mixture.hpp"

namespace psos {

inline const std::vector<std::string> kTasks = {"synth", "bipartition", "colinear", "checks", "sweep"};

struct ExperimentConfig {
  std::string task;
  // Explicit {"means", "covariance", "weights"} or {"generator": "pair" | "colinear", ...}; empty for the task default.
  nlohmann::json spec;
  std::optional<int> n;
  std::vector<std::uint64_t> seeds;
  std::string profile = "desk";
  std::optional<double> tol;
  std::optional<int> max_iters;
  std::string out;
  nlohmann::json params = nlohmann::json::object();  // task-specific overrides

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

MixtureSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const MixtureSpec& s);

// Every default filled in, plus the list of divergences from the paper profile.
nlohmann::json resolve_config(const ExperimentConfig& c);

// One seed of a resolved config; deterministic, no timing fields.
nlohmann::json run_seed(const nlohmann::json& resolved, std::uint64_t seed);

// Mean, median, quantiles, min and max per metric over completed seeds.
nlohmann::json summarize(const nlohmann::json& resolved, const std::vector<nlohmann::json>& results,
                         const std::vector<std::pair<std::uint64_t, std::string>>& failures);

// Writes resolved-config.json, seed-<s>.json, summary.json and MANIFEST under c.out.
// Returns 0 iff every seed completed (and every check passed for task checks).
int run_experiment(const ExperimentConfig& c, int threads);

// Worker count from PSOS_THREADS, else hardware concurrency.
int default_threads();

struct Report {
  std::string table;
  std::string csv;
};

// Inputs are summary.json files or directories holding one.
Report make_report(const std::vector<std::string>& paths);

// Sorted keys, two-space indent, trailing newline.
std::string dump_json(const nlohmann::json& j);

}  // namespace psos
