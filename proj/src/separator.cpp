#include "psos/separator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "psos/error.hpp"
#include "psos/rng.hpp"

namespace psos {

int default_s(double pmin) {
  if (!(pmin > 0.0 && pmin <= 1.0)) throw Error(ErrorCode::ParamOutOfRange, "pmin must lie in (0, 1]");
  return std::max(1, static_cast<int>(std::ceil(std::log(1.0 / pmin) - 1e-12)));
}

void SeparatorConfig::validate() const {
  if (s < 1) throw Error(ErrorCode::ParamOutOfRange, "s must be at least 1");
  if (t <= s) throw Error(ErrorCode::ParamOutOfRange, "t must exceed s");
  if (!(c_lb > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "c_lb must be positive");
  if (!(C_ub >= c_lb)) throw Error(ErrorCode::ParamOutOfRange, "C_ub must be at least c_lb");
  if (!(norm_bound > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "norm_bound must be positive");
  if (!(eta >= 0.0)) throw Error(ErrorCode::ParamOutOfRange, "eta must be nonnegative");
  if (repeats < 1) throw Error(ErrorCode::ParamOutOfRange, "repeats must be at least 1");
  if (!(upper_slack >= 0.0)) throw Error(ErrorCode::ParamOutOfRange, "upper_slack must be nonnegative");
}

SeparatorConfig SeparatorConfig::paper(double pmin) {
  SeparatorConfig c;
  c.profile = "paper";
  c.s = default_s(pmin);
  c.t = 10000000 * c.s;
  return c;
}

SeparatorConfig SeparatorConfig::desk(double pmin) {
  SeparatorConfig c;
  c.profile = "desk";
  c.s = default_s(pmin);
  c.t = 3 * c.s;
  c.calibrate_upper = true;
  return c;
}

namespace {

constexpr int kUpper = 2;  // inequality order: norm, lower, upper

Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& C) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  const Eigen::VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-12 * std::max(1.0, ev.maxCoeff())))
    throw Error(ErrorCode::RankDeficient, "pair-difference covariance is singular");
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

Polynomial lower_form(const Polynomial& m2s, const SeparatorConfig& cfg) {
  return m2s - Polynomial::constant(m2s.dim(), std::pow(cfg.c_lb, cfg.s) - cfg.eta);
}

Polynomial upper_form(const Polynomial& m2t, const SeparatorConfig& cfg) {
  return Polynomial::constant(m2t.dim(), std::pow(cfg.C_ub, cfg.t) + cfg.eta) - m2t;
}

void check_degree(const SeparatorConfig& cfg) {
  if (2 * cfg.t > kMaxMomentOrder) throw Error(ErrorCode::OrderTooLarge, "2t exceeds the supported moment order");
}

struct UpperWitness {
  Eigen::VectorXd w;
  double C = 0.0;
};

// Smallest (m2t(w))^{1/t} over real w with m2s(w) = c^s − η and ‖w‖² ≤ radius,
// by multi-start projected gradient descent on the sphere.
UpperWitness min_upper_witness(const Polynomial& m2s, const Polynomial& m2t, const SeparatorConfig& cfg, double radius) {
  const int d = m2s.dim();
  const double level = std::pow(cfg.c_lb, cfg.s) - cfg.eta;
  const double ts = static_cast<double>(cfg.t) / cfg.s;
  // log of m2t(a u) with a chosen so that m2s(a u) = level.
  auto objective = [&](const Eigen::VectorXd& u) {
    const double ms = m2s.evaluate(u), mt = m2t.evaluate(u);
    if (!(ms > 0.0) || !(mt > 0.0)) return std::numeric_limits<double>::infinity();
    const double a2 = std::pow(level / ms, 1.0 / cfg.s) / u.squaredNorm();
    if (a2 > radius) return std::numeric_limits<double>::infinity();
    return std::log(mt) - ts * std::log(ms) + ts * std::log(level);
  };
  Rng rng(0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::VectorXd> starts;
  for (int i = 0; i < d; ++i) starts.push_back(Eigen::VectorXd::Unit(d, i));
  for (int k = 0; k < cfg.calibration_starts; ++k) starts.push_back(rng.unit_vector(d));
  UpperWitness best;
  double best_f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd bu;
  const double h = 1e-6;
  for (Eigen::VectorXd u : starts) {
    u.normalize();
    double f = objective(u);
    double step = 0.1;
    for (int it = 0; it < 200 && std::isfinite(f) && step > 1e-10; ++it) {
      Eigen::VectorXd g(d);
      for (int i = 0; i < d; ++i) {
        Eigen::VectorXd up = u, um = u;
        up[i] += h;
        um[i] -= h;
        g[i] = (objective(up) - objective(um)) / (2.0 * h);
      }
      g -= g.dot(u) * u;
      if (!g.allFinite() || g.norm() < 1e-12) break;
      Eigen::VectorXd trial = (u - step * g / g.norm()).normalized();
      const double ft = objective(trial);
      if (ft < f) {
        u = trial;
        f = ft;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    if (f < best_f) {
      best_f = f;
      bu = u;
    }
  }
  if (!std::isfinite(best_f)) throw Error(ErrorCode::EstimationFailed, "no direction meets the lower moment bound");
  best.C = std::exp(best_f / cfg.t);
  best.w = bu * std::sqrt(std::pow(level / m2s.evaluate(bu), 1.0 / cfg.s));
  return best;
}

}  // namespace

ConstraintSystem build_constraints(const EmpiricalMoments& zm, const SeparatorConfig& cfg) {
  cfg.validate();
  check_degree(cfg);
  const int d = zm.d();
  const Polynomial m2s = zm.directional_form(2 * cfg.s);
  const Polynomial m2t = zm.directional_form(2 * cfg.t);
  ConstraintSystem sys;
  sys.d = d;
  sys.add_inequality(Polynomial::constant(d, cfg.norm_bound) - Polynomial::quadratic_form(zm.covariance), "norm");
  sys.add_inequality(lower_form(m2s, cfg), "lower");
  sys.add_inequality(upper_form(m2t, cfg), "upper");
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(zm.covariance, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (!(lmin > 0.0)) throw Error(ErrorCode::RankDeficient, "pair-difference covariance is singular");
  sys.bound_B = 10.0 * d * std::max(1.0, 1.0 / lmin);
  return sys;
}

SeparatingPolynomial::SeparatingPolynomial(SymmetricTensor t, int s_) : tensor(std::move(t)), s(s_) {
  const int d = tensor.dim();
  tensor.for_each([&](std::size_t rank, const std::vector<int>& idx) {
    coef_.push_back(tensor.values()[rank] * multinomial(to_exponent(idx, d)));
    idx_.insert(idx_.end(), idx.begin(), idx.end());
  });
}

double SeparatingPolynomial::q(const Eigen::VectorXd& u) const {
  const int r = 2 * s;
  double total = 0.0;
  for (std::size_t k = 0; k < coef_.size(); ++k) {
    double m = coef_[k];
    const int* ix = idx_.data() + k * r;
    for (int j = 0; j < r; ++j) m *= u[ix[j]];
    total += m;
  }
  return total;
}

SeparatingPolynomial make_separating_polynomial(const PseudoExpectation& pe, int s) {
  SeparatingPolynomial q(extract_even_form(pe, s), s);
  q.residuals = pe.residuals;
  return q;
}

double pair_distance(const SeparatingPolynomial& q, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() != q.tensor.dim()) throw Error(ErrorCode::PreconditionFailed, "dimension mismatch");
  const double v = q.q(x - y);
  return q.scale * std::pow(std::max(v, 0.0), 1.0 / (2.0 * q.s));
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  return v[m];
}

double quantile_of(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

std::vector<std::pair<int, int>> random_pairs(int n, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<int, int>> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const int i = static_cast<int>(rng.below(n));
    int j = static_cast<int>(rng.below(n - 1));
    if (j >= i) ++j;
    out.emplace_back(i, j);
  }
  return out;
}

// Largest distance below the chord through the sorted curve.
double knee_point(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n < 3 || v.back() == v.front()) return v.empty() ? 0.0 : v.back();
  double best = -1.0, at = v.back();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / (n - 1);
    const double y = (v[i] - v.front()) / (v.back() - v.front());
    const double gap = x - y;
    if (gap > best) {
      best = gap;
      at = v[i];
    }
  }
  return at;
}

}  // namespace

ThresholdChoice choose_threshold(const SampleSet& points, const SeparatingPolynomial& q, ThresholdPolicy policy, double fixed,
                                 std::uint64_t seed, int pairs) {
  const int n = points.n();
  ThresholdChoice out;
  if (n < 2) throw Error(ErrorCode::PreconditionFailed, "need at least two points");
  SeparatingPolynomial raw = q;
  raw.scale = 1.0;
  std::vector<double> all, same;
  for (auto [i, j] : random_pairs(n, pairs, seed)) {
    const double dist = pair_distance(raw, points.points.row(i).transpose(), points.points.row(j).transpose());
    all.push_back(dist);
    if (points.labels && (*points.labels)[i] == (*points.labels)[j]) same.push_back(dist);
  }
  const bool labeled = points.labels.has_value() && !same.empty();
  const double med = labeled ? median_of(same) : median_of(all);
  out.scale = med > 0.0 ? 1.0 / med : 1.0;
  switch (policy) {
    case ThresholdPolicy::Fixed:
      if (!(fixed > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "threshold must be positive");
      out.threshold = fixed;
      out.policy = "fixed";
      break;
    case ThresholdPolicy::LabeledQuantile:
      if (!labeled) throw Error(ErrorCode::PreconditionFailed, "labeled threshold needs labels");
      out.threshold = quantile_of(same, 0.95) * out.scale;
      out.policy = "labeled_quantile";
      break;
    case ThresholdPolicy::Knee:
      out.threshold = knee_point(all) * out.scale;
      out.policy = "knee";
      break;
  }
  if (!(out.threshold > 0.0)) out.threshold = 1.0;
  return out;
}

Bipartition greedy_bipartition(const SampleSet& points, const SeparatingPolynomial& q, double threshold, std::uint64_t seed,
                               int repeats) {
  const int n = points.n();
  if (n < 2) throw Error(ErrorCode::PreconditionFailed, "need at least two points");
  if (!(threshold > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "threshold must be positive");
  if (repeats < 1) throw Error(ErrorCode::ParamOutOfRange, "repeats must be at least 1");

  // Fixed pair sample for scoring candidate splits.
  const auto score_pairs = random_pairs(n, std::min(20000, 4 * n), seed ^ 0x5eedULL);
  std::vector<double> score_dist;
  score_dist.reserve(score_pairs.size());
  for (auto [i, j] : score_pairs)
    score_dist.push_back(pair_distance(q, points.points.row(i).transpose(), points.points.row(j).transpose()));
  const int min_side = std::max(1, n / 50);

  Rng rng(seed);
  Bipartition best;
  bool have = false;
  std::vector<char> in_s(n);
  for (int r = 0; r < repeats; ++r) {
    const int pivot = static_cast<int>(rng.below(n));
    int size_s = 0;
    for (int j = 0; j < n; ++j) {
      in_s[j] = pair_distance(q, points.points.row(pivot).transpose(), points.points.row(j).transpose()) <= threshold;
      size_s += in_s[j];
    }
    const bool degenerate = size_s < min_side || n - size_s < min_side;
    double score = -1.0;
    if (!degenerate) {
      std::vector<double> within, cross;
      for (std::size_t k = 0; k < score_pairs.size(); ++k)
        (in_s[score_pairs[k].first] == in_s[score_pairs[k].second] ? within : cross).push_back(score_dist[k]);
      const double mw = median_of(within), mc = median_of(cross);
      score = cross.empty() ? -1.0 : (mc - mw) / (mc + mw + 1e-300);
    }
    if (!have || score > best.score) {
      have = true;
      best = Bipartition{};
      best.pivot = pivot;
      best.score = score;
      best.degenerate = degenerate;
      for (int j = 0; j < n; ++j) (in_s[j] ? best.side_a : best.side_b).push_back(j);
    }
  }
  best.threshold = threshold;

  if (points.labels) {
    const auto& lab = *points.labels;
    const int k = *std::max_element(lab.begin(), lab.end());
    std::vector<int> total(k + 1, 0), in_a(k + 1, 0);
    for (int j = 0; j < n; ++j) ++total[lab[j]];
    for (int j : best.side_a) ++in_a[lab[j]];
    double oa = 0.0, ob = 0.0;
    int ca = 0, cb = 0;
    for (int c = 1; c <= k; ++c) {
      if (total[c] == 0) continue;
      const double fa = static_cast<double>(in_a[c]) / total[c];
      const double fb = static_cast<double>(total[c] - in_a[c]) / total[c];
      if (fa > oa) oa = fa, ca = c;
      if (fb > ob) ob = fb, cb = c;
    }
    best.overlap_a = best.side_a.empty() ? 0.0 : oa;
    best.overlap_b = best.side_b.empty() ? 0.0 : ob;
    best.component_a = ca;
    best.component_b = cb;
  }
  return best;
}

SeparatorSolve solve_separator(const EmpiricalMoments& zm, const SeparatorConfig& cfg) {
  cfg.validate();
  check_degree(cfg);
  const int d = zm.d();
  // v = A w with w scaled so that the largest 2s-th moment over the
  // coordinate directions is 1.
  Eigen::MatrixXd A = inverse_sqrt(zm.covariance);
  const Polynomial white2s = zm.directional_form(2 * cfg.s).substitute_linear(A);
  double peak = 0.0;
  for (int i = 0; i < d; ++i) peak = std::max(peak, white2s.evaluate(Eigen::VectorXd::Unit(d, i)));
  const double lambda = std::pow(peak, -1.0 / (2.0 * cfg.s));
  A *= lambda;
  const Polynomial m2s = zm.directional_form(2 * cfg.s).substitute_linear(A);
  const Polynomial m2t = zm.directional_form(2 * cfg.t).substitute_linear(A);
  const double radius = cfg.norm_bound / (lambda * lambda);

  ConstraintSystem sys;
  sys.d = d;
  sys.add_inequality(Polynomial::constant(d, radius) - Polynomial::squared_norm(d), "norm");
  sys.add_inequality(lower_form(m2s, cfg), "lower");
  sys.add_inequality(upper_form(m2t, cfg), "upper");
  sys.bound_B = radius;
  CompiledProblem prob = compile(sys, d, 2 * cfg.t);

  SeparatorSolve out;
  out.C_used = cfg.C_ub;
  if (cfg.calibrate_upper) {
    const UpperWitness wit = min_upper_witness(m2s, m2t, cfg, radius);
    out.C_real = wit.C;
    out.witness = A * wit.w;
    out.C_used = std::max((1.0 + cfg.upper_slack) * wit.C, cfg.c_lb);
  }
  prob.set_scalar_constant(kUpper, std::pow(out.C_used, cfg.t) + cfg.eta);
  SolveResult res = solve_feasible(prob, cfg.tol, cfg.max_iters, cfg.solver);
  out.probes = 1;
  out.iterations = res.iterations;
  out.status = res.status;
  if (res.status == SolveStatus::Feasible) {
    out.upper_value = apply(*res.pe, m2t);
    PseudoExpectation pe_v = pullback(*res.pe, A);
    pe_v.residuals = res.pe->residuals;
    out.pe = std::move(pe_v);
  }
  return out;
}

double median_cross_same_ratio(const SampleSet& points, const SeparatingPolynomial& q, std::uint64_t seed, int pairs) {
  if (!points.labels) throw Error(ErrorCode::PreconditionFailed, "ratio needs labels");
  std::vector<double> same, cross;
  for (auto [i, j] : random_pairs(points.n(), pairs, seed)) {
    const double v = q.q((points.points.row(i) - points.points.row(j)).transpose());
    ((*points.labels)[i] == (*points.labels)[j] ? same : cross).push_back(v);
  }
  const double ms = median_of(same);
  return ms > 0.0 ? median_of(cross) / ms : 0.0;
}

SeparatorRun run_separator(const SampleSet& points, const SeparatorConfig& cfg, ThresholdPolicy policy, std::uint64_t seed,
                           double fixed_threshold) {
  cfg.validate();
  const SampleSet z = pair_differences(points, cfg.max_pairs_factor * points.n(), seed);
  const EmpiricalMoments zm = accumulate(z, {2, 2 * cfg.s, 2 * cfg.t});
  SeparatorRun run;
  run.solve = solve_separator(zm, cfg);
  if (run.solve.status != SolveStatus::Feasible) {
    run.split.degenerate = true;
    for (int j = 0; j < points.n(); ++j) run.split.side_a.push_back(j);
    return run;
  }
  SeparatingPolynomial q = make_separating_polynomial(*run.solve.pe, cfg.s);
  run.threshold = choose_threshold(points, q, policy, fixed_threshold, seed + 1);
  q.scale = run.threshold.scale;
  run.split = greedy_bipartition(points, q, run.threshold.threshold, seed + 2, cfg.repeats);
  if (points.labels) run.median_ratio = median_cross_same_ratio(points, q, seed + 3);
  run.q = std::move(q);
  return run;
}

}  // namespace psos
