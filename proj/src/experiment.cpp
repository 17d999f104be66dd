#include "psos/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "psos/checks.hpp"
#include "psos/colinear.hpp"
#include "psos/direction.hpp"
#include "psos/error.hpp"
#include "psos/separator.hpp"

namespace psos {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const double kLn2 = std::numbers::ln2;

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_vec(const json& a) {
  if (!a.is_array()) throw Error(ErrorCode::InvalidSpec, "expected a numeric array");
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::ParamOutOfRange, where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw Error(ErrorCode::ParamOutOfRange, "unknown key '" + key + "' in " + where);
}

// --- spec resolution -------------------------------------------------------

json default_spec(const std::string& task) {
  if (task == "colinear")
    return {{"generator", "colinear"}, {"k", 3}, {"d", 6}, {"condition", 16.0}, {"spacing", 14.0}, {"instance_seed_offset", 1000}};
  return {{"generator", "pair"}, {"d", 4}, {"separation", 25.0 * kLn2}};
}

json resolve_spec(const json& raw, const std::string& task) {
  if (raw.is_null() || (raw.is_object() && raw.empty())) return default_spec(task);
  if (!raw.is_object()) throw Error(ErrorCode::InvalidSpec, "spec must be an object");
  if (!raw.contains("generator")) return spec_to_json(spec_from_json(raw));
  const std::string g = raw.at("generator").get<std::string>();
  json out = raw;
  if (g == "pair") {
    reject_unknown(raw, {"generator", "d", "separation"}, "pair spec");
    out["d"] = get_or(raw, "d", 4);
    out["separation"] = get_or(raw, "separation", 25.0 * kLn2);
    if (out["d"].get<int>() < 1 || !(out["separation"].get<double>() >= 0.0))
      throw Error(ErrorCode::InvalidSpec, "pair spec needs d ≥ 1 and separation ≥ 0");
  } else if (g == "colinear") {
    reject_unknown(raw, {"generator", "k", "d", "condition", "spacing", "instance_seed_offset"}, "colinear spec");
    const json def = default_spec("colinear");
    for (const auto& [key, value] : def.items())
      if (!out.contains(key)) out[key] = value;
  } else {
    throw Error(ErrorCode::InvalidSpec, "unknown generator '" + g + "'");
  }
  return out;
}

struct Instance {
  MixtureSpec spec;
  std::optional<Eigen::VectorXd> truth;
};

Instance build_instance(const json& spec, std::uint64_t seed, std::optional<double> separation = std::nullopt) {
  Instance inst;
  if (!spec.contains("generator")) {
    inst.spec = spec_from_json(spec);
    return inst;
  }
  const std::string g = spec.at("generator").get<std::string>();
  if (g == "pair") {
    const int d = spec.at("d").get<int>();
    const double sep = separation.value_or(spec.at("separation").get<double>());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
    m[0] = std::sqrt(sep) / 2.0;
    inst.spec.means = {m, -m};
    inst.spec.covariance = Eigen::MatrixXd::Identity(d, d);
    inst.spec.weights = {0.5, 0.5};
    inst.truth = Eigen::VectorXd::Unit(d, 0);
  } else {
    const ColinearInstance ci =
        make_colinear_instance(spec.at("instance_seed_offset").get<std::uint64_t>() + seed, spec.at("k").get<int>(),
                               spec.at("d").get<int>(), spec.at("condition").get<double>(), spec.at("spacing").get<double>());
    inst.spec = ci.spec;
    inst.truth = ci.u0;
  }
  inst.spec.validate();
  return inst;
}

// pmin, k and separation constant fixed by the resolved spec (generators are seed-independent here).
struct SpecShape {
  double pmin = 0.5;
  int k = 2, d = 1;
  double C_sep = 1.0;
};

SpecShape spec_shape(const json& spec) {
  SpecShape sh;
  if (spec.contains("generator")) {
    const std::string g = spec.at("generator").get<std::string>();
    sh.d = spec.at("d").get<int>();
    if (g == "pair") {
      sh.k = 2;
      sh.C_sep = spec.at("separation").get<double>() / kLn2;
    } else {
      sh.k = spec.at("k").get<int>();
      const double sp = spec.at("spacing").get<double>();
      sh.C_sep = sh.k > 1 ? sp * sp / std::log(static_cast<double>(sh.k)) : 1.0;
    }
    sh.pmin = 1.0 / sh.k;
    return sh;
  }
  const MixtureSpec s = spec_from_json(spec);
  sh.k = s.k();
  sh.d = s.d();
  sh.pmin = s.pmin();
  if (sh.k > 1) sh.C_sep = separation_report(s).csep_min;
  return sh;
}

// --- separator parameters --------------------------------------------------

json separator_json(const SeparatorConfig& c) {
  return {{"profile", c.profile}, {"s", c.s}, {"t", c.t}, {"c_lb", c.c_lb}, {"C_ub", c.C_ub}, {"norm_bound", c.norm_bound},
          {"eta", c.eta}, {"calibrate_upper", c.calibrate_upper}, {"upper_slack", c.upper_slack},
          {"calibration_starts", c.calibration_starts}, {"repeats", c.repeats}, {"max_pairs_factor", c.max_pairs_factor},
          {"tol", c.tol}, {"max_iters", c.max_iters}};
}

SeparatorConfig separator_from_json(const json& j) {
  SeparatorConfig c;
  c.profile = j.at("profile").get<std::string>();
  c.s = j.at("s").get<int>();
  c.t = j.at("t").get<int>();
  c.c_lb = j.at("c_lb").get<double>();
  c.C_ub = j.at("C_ub").get<double>();
  c.norm_bound = j.at("norm_bound").get<double>();
  c.eta = j.at("eta").get<double>();
  c.calibrate_upper = j.at("calibrate_upper").get<bool>();
  c.upper_slack = j.at("upper_slack").get<double>();
  c.calibration_starts = j.at("calibration_starts").get<int>();
  c.repeats = j.at("repeats").get<int>();
  c.max_pairs_factor = j.at("max_pairs_factor").get<long>();
  c.tol = j.at("tol").get<double>();
  c.max_iters = j.at("max_iters").get<int>();
  c.validate();
  return c;
}

const std::map<std::string, ThresholdPolicy> kThreshold = {
    {"fixed", ThresholdPolicy::Fixed}, {"labeled_quantile", ThresholdPolicy::LabeledQuantile}, {"knee", ThresholdPolicy::Knee}};

const std::map<std::string, GapPolicy> kGap = {{"mad", GapPolicy::Mad}, {"expected_k", GapPolicy::ExpectedK}, {"fixed", GapPolicy::Fixed}};

// --- direction parameters --------------------------------------------------

json direction_json(const DirectionConfig& c) {
  return {{"profile", c.profile}, {"s", c.s}, {"t", c.t}, {"k", c.k}, {"pmin", c.pmin}, {"C_sep", c.C_sep}, {"tau", c.tau},
          {"resolution_u", c.resolution_u}, {"resolution_l", c.resolution_l},
          {"sigma_mode", c.sigma_mode == SigmaMode::Oracle ? "oracle" : "estimated"}, {"max_probes", c.max_probes},
          {"probe_max_iters", c.probe_max_iters}, {"tol", c.tol}};
}

DirectionConfig direction_from_json(const json& j) {
  DirectionConfig c;
  c.profile = j.at("profile").get<std::string>();
  c.s = j.at("s").get<int>();
  c.t = j.at("t").get<int>();
  c.k = j.at("k").get<int>();
  c.pmin = j.at("pmin").get<double>();
  c.C_sep = j.at("C_sep").get<double>();
  c.tau = j.at("tau").get<double>();
  c.resolution_u = j.at("resolution_u").get<double>();
  c.resolution_l = j.at("resolution_l").get<double>();
  const std::string mode = j.at("sigma_mode").get<std::string>();
  if (mode != "oracle" && mode != "estimated") throw Error(ErrorCode::ParamOutOfRange, "sigma_mode must be oracle or estimated");
  c.sigma_mode = mode == "oracle" ? SigmaMode::Oracle : SigmaMode::Estimated;
  c.max_probes = j.at("max_probes").get<int>();
  c.probe_max_iters = j.at("probe_max_iters").get<int>();
  c.tol = j.at("tol").get<double>();
  return c;
}

// Apply overrides onto a resolved block, refusing keys it does not have.
json merge_overrides(json base, const json& overrides, const std::string& where) {
  if (overrides.is_null()) return base;
  if (!overrides.is_object()) throw Error(ErrorCode::ParamOutOfRange, where + " overrides must be an object");
  for (const auto& [key, value] : overrides.items()) {
    if (!base.contains(key)) throw Error(ErrorCode::ParamOutOfRange, "unknown key '" + key + "' in " + where);
    if (key == "profile") throw Error(ErrorCode::ParamOutOfRange, "profile is set at the top level");
    base[key] = value;
  }
  return base;
}

void add_divergences(json& list, const std::string& block, const json& resolved, const json& paper) {
  for (const auto& [key, value] : resolved.items()) {
    if (key == "profile") continue;
    if (!paper.contains(key) || paper.at(key) != value) list.push_back({{"key", block + "." + key}, {"value", value}, {"paper", paper.value(key, json())}});
  }
}

json resolve_separator(const ExperimentConfig& c, double pmin, json& divergences) {
  SeparatorConfig base = c.profile == "paper" ? SeparatorConfig::paper(pmin) : SeparatorConfig::desk(pmin);
  if (c.tol) base.tol = *c.tol;
  if (c.max_iters) base.max_iters = *c.max_iters;
  const json sep = merge_overrides(separator_json(base), c.params.value("separator", json()), "separator");
  separator_from_json(sep);
  SeparatorConfig paper = SeparatorConfig::paper(pmin);
  add_divergences(divergences, "separator", sep, separator_json(paper));
  return sep;
}

}  // namespace

// --- public helpers ----------------------------------------------------------

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

MixtureSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidSpec, "spec must be an object");
  reject_unknown(j, {"means", "covariance", "weights"}, "spec");
  if (!j.contains("means") || !j.contains("covariance") || !j.contains("weights"))
    throw Error(ErrorCode::InvalidSpec, "spec needs means, covariance and weights");
  MixtureSpec s;
  for (const json& m : j.at("means")) s.means.push_back(json_vec(m));
  const json& cov = j.at("covariance");
  if (!cov.is_array() || cov.empty()) throw Error(ErrorCode::InvalidSpec, "covariance must be a nonempty matrix");
  const int d = static_cast<int>(cov.size());
  s.covariance.resize(d, d);
  for (int i = 0; i < d; ++i) {
    const Eigen::VectorXd row = json_vec(cov[i]);
    if (row.size() != d) throw Error(ErrorCode::InvalidSpec, "covariance must be square");
    s.covariance.row(i) = row.transpose();
  }
  for (const json& w : j.at("weights")) s.weights.push_back(w.get<double>());
  s.validate();
  return s;
}

json spec_to_json(const MixtureSpec& s) {
  json means = json::array();
  for (const Eigen::VectorXd& m : s.means) means.push_back(vec_json(m));
  json cov = json::array();
  for (int i = 0; i < s.d(); ++i) cov.push_back(vec_json(s.covariance.row(i).transpose()));
  return {{"means", means}, {"covariance", cov}, {"weights", s.weights}};
}

void ExperimentConfig::validate() const {
  if (std::find(kTasks.begin(), kTasks.end(), task) == kTasks.end())
    throw Error(ErrorCode::ParamOutOfRange, "unknown task '" + task + "'");
  if (profile != "desk" && profile != "paper") throw Error(ErrorCode::ParamOutOfRange, "profile must be desk or paper");
  if (seeds.empty()) throw Error(ErrorCode::ParamOutOfRange, "at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw Error(ErrorCode::ParamOutOfRange, "seeds must be distinct");
  if (n && *n < 2) throw Error(ErrorCode::ParamOutOfRange, "n must be at least 2");
  if (tol && !(*tol > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "tol must be positive");
  if (max_iters && *max_iters < 1) throw Error(ErrorCode::ParamOutOfRange, "max_iters must be positive");
  if (!params.is_object()) throw Error(ErrorCode::ParamOutOfRange, "params must be an object");
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, {"task", "spec", "n", "seeds", "profile", "tol", "max_iters", "out", "params"}, "config");
  ExperimentConfig c;
  c.task = get_or<std::string>(j, "task", "");
  if (j.contains("spec")) c.spec = j.at("spec");
  if (j.contains("n")) c.n = j.at("n").get<int>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.profile = get_or<std::string>(j, "profile", "desk");
  if (j.contains("tol")) c.tol = j.at("tol").get<double>();
  if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<int>();
  c.out = get_or<std::string>(j, "out", "");
  if (j.contains("params")) c.params = j.at("params");
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j = {{"task", c.task}, {"profile", c.profile}, {"seeds", c.seeds}, {"out", c.out}, {"params", c.params}};
  if (!c.spec.is_null()) j["spec"] = c.spec;
  if (c.n) j["n"] = *c.n;
  if (c.tol) j["tol"] = *c.tol;
  if (c.max_iters) j["max_iters"] = *c.max_iters;
  return j;
}

json resolve_config(const ExperimentConfig& c) {
  c.validate();
  json r;
  r["task"] = c.task;
  r["profile"] = c.profile;
  r["seeds"] = c.seeds;
  json divergences = json::array();
  json params = json::object();
  const std::string& task = c.task;

  if (task == "checks") {
    reject_unknown(c.params, {}, "checks params");
    r["n"] = 0;
    r["tol"] = 1e-9;
    r["max_iters"] = 0;
    r["spec"] = json::object();
  } else {
    r["spec"] = resolve_spec(c.spec, task);
    const int default_n = task == "colinear" ? 5000 : task == "synth" ? 1000 : 2000;
    r["n"] = c.n.value_or(default_n);
    r["tol"] = c.tol.value_or(kDefaultTol);
    const SpecShape sh = spec_shape(r["spec"]);

    if (task == "synth") {
      reject_unknown(c.params, {}, "synth params");
      r["max_iters"] = 0;
    } else if (task == "bipartition" || task == "sweep") {
      reject_unknown(c.params, task == "sweep" ? std::set<std::string>{"separator", "threshold_policy", "fixed_threshold", "separations"}
                                               : std::set<std::string>{"separator", "threshold_policy", "fixed_threshold"},
                     task + " params");
      if (sh.k != 2 && task == "sweep") throw Error(ErrorCode::ParamOutOfRange, "sweep runs on two-component specs");
      params["separator"] = resolve_separator(c, sh.pmin, divergences);
      params["threshold_policy"] = c.params.value("threshold_policy", "labeled_quantile");
      if (!kThreshold.count(params["threshold_policy"].get<std::string>()))
        throw Error(ErrorCode::ParamOutOfRange, "threshold_policy must be fixed, labeled_quantile or knee");
      params["fixed_threshold"] = c.params.value("fixed_threshold", 0.0);
      if (task == "sweep") {
        if (!r["spec"].contains("generator") || r["spec"]["generator"] != "pair")
          throw Error(ErrorCode::ParamOutOfRange, "sweep varies the separation of a pair generator spec");
        std::vector<double> seps = {4 * kLn2, 9 * kLn2, 16 * kLn2, 25 * kLn2};
        if (c.params.contains("separations")) seps = c.params["separations"].get<std::vector<double>>();
        if (seps.empty()) throw Error(ErrorCode::ParamOutOfRange, "separations must be nonempty");
        for (double s : seps)
          if (!(s >= 0.0)) throw Error(ErrorCode::ParamOutOfRange, "separations must be nonnegative");
        params["separations"] = seps;
      }
      r["max_iters"] = params["separator"]["max_iters"];
    } else if (task == "colinear") {
      reject_unknown(c.params, {"direction", "gap"}, "colinear params");
      DirectionConfig base = c.profile == "paper" ? DirectionConfig::paper(sh.pmin, sh.k, sh.C_sep)
                                                  : DirectionConfig::desk(sh.pmin, sh.k, sh.C_sep, sh.d);
      if (c.tol) base.tol = *c.tol;
      if (c.max_iters) base.probe_max_iters = *c.max_iters;
      const json dir = merge_overrides(direction_json(base), c.params.value("direction", json()), "direction");
      DirectionConfig check = direction_from_json(dir);
      if (check.sigma_mode == SigmaMode::Oracle) check.sigma_sq = 1.0;  // filled in per seed
      check.validate();
      add_divergences(divergences, "direction", dir, direction_json(DirectionConfig::paper(sh.pmin, sh.k, sh.C_sep)));
      params["direction"] = dir;
      json gap = {{"policy", "mad"}, {"multiple", 6.0}, {"fixed", 0.0}, {"expected_k", sh.k}};
      gap = merge_overrides(gap, c.params.value("gap", json()), "gap");
      if (!kGap.count(gap["policy"].get<std::string>())) throw Error(ErrorCode::ParamOutOfRange, "gap policy must be mad, expected_k or fixed");
      params["gap"] = gap;
      r["max_iters"] = dir["probe_max_iters"];
    }
  }
  r["params"] = params;
  r["divergences"] = divergences;
  return r;
}

json run_seed(const json& resolved, std::uint64_t seed) {
  const std::string task = resolved.at("task").get<std::string>();
  json out = {{"seed", seed}, {"task", task}};
  if (task == "checks") {
    json reports = json::array();
    bool pass = true;
    int failed = 0;
    for (const CheckReport& rep : run_all_checks(seed)) {
      reports.push_back(to_json(rep));
      pass = pass && rep.pass;
      failed += !rep.pass;
    }
    out["reports"] = reports;
    out["pass"] = pass;
    out["failed_checks"] = failed;
    return out;
  }

  const json& params = resolved.at("params");
  const int n = resolved.at("n").get<int>();

  if (task == "synth") {
    const Instance inst = build_instance(resolved.at("spec"), seed);
    const SampleSet pts = sample(inst.spec, n, seed);
    const Eigen::VectorXd mu = pts.points.colwise().mean().transpose();
    const Eigen::MatrixXd centered = pts.points.rowwise() - mu.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / n;
    const Eigen::MatrixXd pop = population_covariance(inst.spec);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov - pop).eigenvalues().cwiseAbs();
    const Eigen::VectorXd pev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pop).eigenvalues();
    std::vector<int> counts(inst.spec.k(), 0);
    for (int l : *pts.labels) ++counts[l - 1];
    const SeparationReport sr = separation_report(inst.spec);
    out["n"] = n;
    out["d"] = inst.spec.d();
    out["k"] = inst.spec.k();
    out["component_counts"] = counts;
    out["mean_error"] = (mu - population_mean(inst.spec)).norm();
    out["cov_error"] = ev.maxCoeff() / pev.maxCoeff();
    out["separation"] = {{"min_pair", sr.min_pair}, {"max_pair", sr.max_pair}, {"csep_min", sr.csep_min}};
    return out;
  }

  if (task == "bipartition" || task == "sweep") {
    const SeparatorConfig cfg = separator_from_json(params.at("separator"));
    const ThresholdPolicy policy = kThreshold.at(params.at("threshold_policy").get<std::string>());
    const double fixed = params.at("fixed_threshold").get<double>();
    auto one = [&](std::optional<double> separation) {
      const Instance inst = build_instance(resolved.at("spec"), seed, separation);
      const SampleSet pts = sample(inst.spec, n, seed);
      const SeparatorRun run = run_separator(pts, cfg, policy, seed, fixed);
      json r = {{"status", status_name(run.solve.status)}, {"C_used", run.solve.C_used}, {"C_real", run.solve.C_real},
                {"probes", run.solve.probes}, {"iterations", run.solve.iterations}, {"threshold", run.threshold.threshold},
                {"threshold_scale", run.threshold.scale}, {"threshold_policy", run.threshold.policy},
                {"median_ratio", run.median_ratio}, {"degenerate", run.split.degenerate},
                {"side_sizes", {run.split.side_a.size(), run.split.side_b.size()}}, {"min_overlap", run.split.min_overlap()}};
      r["overlap_a"] = run.split.overlap_a ? json(*run.split.overlap_a) : json();
      r["overlap_b"] = run.split.overlap_b ? json(*run.split.overlap_b) : json();
      std::vector<int> side(n, 0);
      for (int i : run.split.side_a) side[i] = 1;
      for (int i : run.split.side_b) side[i] = 2;
      r["assignment"] = side;
      return r;
    };
    if (task == "bipartition") {
      out.update(one(std::nullopt));
      return out;
    }
    json points = json::array();
    for (double sep : params.at("separations").get<std::vector<double>>()) {
      json p = one(sep);
      p.erase("assignment");
      p["separation"] = sep;
      points.push_back(p);
    }
    out["points"] = points;
    return out;
  }

  // colinear
  const Instance inst = build_instance(resolved.at("spec"), seed);
  const SampleSet pts = sample(inst.spec, n, seed);
  DirectionConfig cfg = direction_from_json(params.at("direction"));
  if (cfg.sigma_mode == SigmaMode::Oracle) {
    if (!inst.truth) throw Error(ErrorCode::PreconditionFailed, "oracle σ² needs a generator spec with a known mean direction");
    cfg.sigma_sq = sigma_sq_identity_check(inst.spec, *inst.truth).lhs;
  }
  const json& g = params.at("gap");
  GapChoice gap;
  gap.policy = kGap.at(g.at("policy").get<std::string>());
  gap.multiple = g.at("multiple").get<double>();
  gap.fixed = g.at("fixed").get<double>();
  gap.expected_k = g.at("expected_k").get<int>();
  const ClusteringResult res = run_colinear(pts, cfg, gap, seed, inst.truth);
  out["assignment"] = res.assignment;
  out["k_found"] = res.k_found;
  out["misclassification"] = res.misclassification ? json(*res.misclassification) : json();
  out["branch"] = res.direction.branch;
  out["reason"] = res.direction.reason;
  out["direction"] = vec_json(res.direction_original);
  out["correlation"] = res.direction.correlation ? json(*res.direction.correlation) : json();
  out["sigma_sq"] = res.sigma_sq;
  out["gap"] = res.gap;
  out["gap_policy"] = res.gap_policy;
  out["cuts"] = res.cuts;
  out["T_U"] = res.direction.T_U ? json(*res.direction.T_U) : json();
  out["T_L"] = res.direction.T_L ? json(*res.direction.T_L) : json();
  out["probes"] = res.direction.probes;
  out["undecided"] = res.direction.undecided;
  out["iterations"] = res.direction.iterations;
  return out;
}

namespace {

json stats(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  if (m == 0) return {{"count", 0}};
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(m - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, m - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  double sum = 0.0;
  for (double x : v) sum += x;
  return {{"count", m}, {"mean", sum / static_cast<double>(m)}, {"median", q(0.5)}, {"min", v.front()}, {"max", v.back()},
          {"q10", q(0.1)}, {"q25", q(0.25)}, {"q75", q(0.75)}, {"q90", q(0.9)}};
}

const std::map<std::string, std::vector<std::string>> kMetrics = {
    {"synth", {"mean_error", "cov_error"}},
    {"bipartition", {"min_overlap", "median_ratio", "iterations"}},
    {"colinear", {"misclassification", "correlation", "k_found"}},
    {"checks", {"failed_checks"}},
    {"sweep", {"min_overlap", "median_ratio"}},
};

json metric_block(const std::vector<const json*>& rows, const std::vector<std::string>& names) {
  json block = json::object();
  for (const std::string& name : names) {
    std::vector<double> v;
    for (const json* r : rows)
      if (r->contains(name) && r->at(name).is_number()) v.push_back(r->at(name).get<double>());
    block[name] = stats(v);
  }
  return block;
}

}  // namespace

json summarize(const json& resolved, const std::vector<json>& results, const std::vector<std::pair<std::uint64_t, std::string>>& failures) {
  const std::string task = resolved.at("task").get<std::string>();
  json s = {{"task", task}, {"profile", resolved.at("profile")}, {"n", resolved.at("n")}, {"seeds", resolved.at("seeds")}};
  s["completed"] = results.size();
  json fail = json::array();
  for (const auto& [seed, msg] : failures) fail.push_back({{"seed", seed}, {"error", msg}});
  s["failures"] = fail;
  std::vector<const json*> rows;
  for (const json& r : results) rows.push_back(&r);
  if (task == "sweep") {
    json points = json::array();
    const std::vector<double> seps = resolved.at("params").at("separations").get<std::vector<double>>();
    bool monotone = true;
    double prev = -1.0;
    for (std::size_t i = 0; i < seps.size(); ++i) {
      std::vector<const json*> at;
      for (const json& r : results) at.push_back(&r.at("points").at(i));
      json p = {{"separation", seps[i]}, {"metrics", metric_block(at, kMetrics.at("sweep"))}};
      const json& med = p["metrics"]["min_overlap"];
      if (med.contains("median")) {
        const double m = med["median"].get<double>();
        monotone = monotone && m >= prev;
        prev = m;
      }
      points.push_back(p);
    }
    s["points"] = points;
    s["monotone_median_overlap"] = monotone;
  } else {
    s["metrics"] = metric_block(rows, kMetrics.at(task));
  }
  if (task == "checks") {
    bool pass = failures.empty();
    for (const json& r : results) pass = pass && r.at("pass").get<bool>();
    s["pass"] = pass;
  }
  return s;
}

int default_threads() {
  if (const char* env = std::getenv("PSOS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw Error(ErrorCode::ParamOutOfRange, "PSOS_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + p.string());
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

int run_experiment(const ExperimentConfig& c, int threads) {
  const json resolved = resolve_config(c);
  if (c.out.empty()) throw Error(ErrorCode::IoError, "output directory is required");
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "resolved-config.json", dump_json(resolved));

  const std::vector<std::uint64_t>& seeds = c.seeds;
  std::vector<std::optional<json>> results(seeds.size());
  std::vector<std::string> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      const std::string name = "seed-" + std::to_string(seeds[i]) + ".json";
      try {
        json r = run_seed(resolved, seeds[i]);
        write_file(dir / name, dump_json(r));
        results[i] = std::move(r);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        write_file(dir / name, dump_json({{"seed", seeds[i]}, {"task", c.task}, {"error", e.what()}}));
      }
    }
  };
  const int workers = std::clamp(threads, 1, static_cast<int>(seeds.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::vector<json> done;
  std::vector<std::pair<std::uint64_t, std::string>> failures;
  std::ostringstream manifest;
  manifest << "created " << utc_now() << "\n";
  manifest << "resolved-config.json ok\n";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::string name = "seed-" + std::to_string(seeds[i]) + ".json";
    if (results[i]) {
      done.push_back(*results[i]);
      manifest << name << " ok\n";
    } else {
      failures.emplace_back(seeds[i], errors[i]);
      manifest << name << " FAILED " << errors[i] << "\n";
    }
  }
  const json summary = summarize(resolved, done, failures);
  write_file(dir / "summary.json", dump_json(summary));
  manifest << "summary.json ok\n";
  write_file(dir / "MANIFEST", manifest.str());
  if (!failures.empty()) return 1;
  if (c.task == "checks" && !summary.at("pass").get<bool>()) return 1;
  return 0;
}

// --- report ------------------------------------------------------------------

namespace {

std::string fmt(const json& v) {
  if (!v.is_number()) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
  return buf;
}

struct Row {
  std::string task, name, point;
  json metrics;
  std::size_t count = 0;
};

// Union of task metrics in a fixed order, for the CSV columns.
std::vector<std::string> all_metrics() {
  std::vector<std::string> out;
  for (const std::string& task : kTasks)
    for (const std::string& m : kMetrics.at(task))
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  return out;
}

}  // namespace

Report make_report(const std::vector<std::string>& paths) {
  if (paths.empty()) throw Error(ErrorCode::MissingSummary, "no summaries given");
  std::vector<Row> rows;
  for (const std::string& p : paths) {
    fs::path file(p);
    if (fs::is_directory(file)) file /= "summary.json";
    if (!fs::is_regular_file(file)) throw Error(ErrorCode::MissingSummary, "no summary at " + p);
    std::ifstream f(file);
    json s;
    try {
      s = json::parse(f);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MissingSummary, "unreadable summary " + file.string() + ": " + e.what());
    }
    if (!s.is_object() || !s.contains("task") || !kMetrics.count(s["task"].get<std::string>()))
      throw Error(ErrorCode::MissingSummary, "not a summary: " + file.string());
    const std::string task = s["task"].get<std::string>();
    const std::string name = fs::weakly_canonical(file).parent_path().filename().string();
    const std::size_t count = s.value("completed", 0);
    if (task == "sweep") {
      for (const json& pt : s.at("points")) rows.push_back({task, name, "separation=" + fmt(pt.at("separation")), pt.at("metrics"), count});
    } else {
      rows.push_back({task, name, "", s.at("metrics"), count});
    }
  }

  const std::vector<std::string> metrics = all_metrics();
  const std::vector<std::string> fields = {"median", "mean", "min", "max"};
  std::ostringstream csv, table;
  csv << "task,name,point,count";
  for (const std::string& m : metrics)
    for (const std::string& f : fields) csv << "," << m << "_" << f;
  csv << "\n";
  for (const std::string& task : kTasks) {
    const std::vector<std::string>& own = kMetrics.at(task);
    bool header = false;
    for (const Row& r : rows) {
      if (r.task != task) continue;
      if (!header) {
        if (!table.str().empty()) table << "\n";
        table << "== " << task << " ==\n";
        char cell[64];
        std::snprintf(cell, sizeof cell, "%-20s %-20s %6s", "name", "point", "count");
        table << cell;
        for (const std::string& m : own) {
          std::snprintf(cell, sizeof cell, " %20s", (m + " median").c_str());
          table << cell;
        }
        table << "\n";
        header = true;
      }
      csv << r.task << "," << r.name << "," << r.point << "," << r.count;
      for (const std::string& m : metrics)
        for (const std::string& f : fields) csv << "," << (r.metrics.contains(m) ? fmt(r.metrics[m].value(f, json())) : "");
      csv << "\n";
      char cell[64];
      std::snprintf(cell, sizeof cell, "%-20s %-20s %6zu", r.name.c_str(), r.point.c_str(), r.count);
      table << cell;
      for (const std::string& m : own) {
        std::snprintf(cell, sizeof cell, " %20s", r.metrics.contains(m) ? fmt(r.metrics[m].value("median", json())).c_str() : "");
        table << cell;
      }
      table << "\n";
    }
  }
  return {table.str(), csv.str()};
}

}  // namespace psos
