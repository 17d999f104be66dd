#include "psos/direction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "psos/error.hpp"
#include "psos/rng.hpp"

namespace psos {

void DirectionConfig::validate() const {
  if (s < 1) throw Error(ErrorCode::ParamOutOfRange, "s must be at least 1");
  if (t <= s) throw Error(ErrorCode::ParamOutOfRange, "t must exceed s");
  if (k < 1) throw Error(ErrorCode::ParamOutOfRange, "k must be at least 1");
  if (!(pmin > 0.0 && pmin <= 1.0)) throw Error(ErrorCode::ParamOutOfRange, "pmin must lie in (0, 1]");
  if (!(C_sep > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "C_sep must be positive");
  if (resolution_u < 0.0 || resolution_l < 0.0) throw Error(ErrorCode::ParamOutOfRange, "resolutions must be positive");
  if (max_probes < 1) throw Error(ErrorCode::ParamOutOfRange, "max_probes must be at least 1");
  if (sigma_mode == SigmaMode::Oracle && !sigma_sq) throw Error(ErrorCode::PreconditionFailed, "oracle mode needs sigma_sq");
}

namespace {

int ceil_log_inv(double pmin) { return std::max(1, static_cast<int>(std::ceil(std::log(1.0 / pmin) - 1e-12))); }

long choose(int n, int r) {
  long c = 1;
  for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
  return c;
}

}  // namespace

DirectionConfig DirectionConfig::paper(double pmin, int k, double C_sep) {
  DirectionConfig c;
  c.profile = "paper";
  c.pmin = pmin;
  c.k = k;
  c.C_sep = C_sep;
  c.s = ceil_log_inv(pmin);
  c.t = 5000 * c.s;
  c.tau = 800.0 * std::numbers::e / (C_sep * k * k);
  return c;
}

DirectionConfig DirectionConfig::desk(double pmin, int k, double C_sep, int d, int max_basis) {
  DirectionConfig c = paper(pmin, k, C_sep);
  c.profile = "desk";
  while (c.s > 1 && choose(d + 4 * c.s, d) > max_basis) --c.s;
  c.t = 4 * c.s;
  return c;
}

namespace {

// sign·form + constant ≥ 0 with the constant set per probe.
struct Search {
  CompiledProblem prob;
  Polynomial form;
  double sign = 1.0;
  int iterations = 0, probes = 0, undecided = 0;
  std::optional<SolverState> warm;
  std::vector<ProbeRecord> trace;

  Search(const EmpiricalMoments& m, int order, double sign_, int degree) : form(m.directional_form(order)), sign(sign_) {
    const int d = m.d();
    ConstraintSystem sys = sphere_system(d);
    Polynomial q = form;
    q *= sign;
    q += Polynomial::constant(d, -sign);
    sys.add_inequality(q, sign > 0 ? "moment_lower" : "moment_upper");
    prob = compile(sys, d, degree);
  }

  // Feasibility of form ≥ T (sign +1) or form ≤ T (sign −1).
  SolveResult probe(double T, const DirectionConfig& cfg) {
    prob.set_scalar_constant(0, -sign * T);
    SolveOptions opt;
    if (warm) opt.warm = &*warm;
    SolveResult r = solve_feasible(prob, cfg.tol, cfg.probe_max_iters, opt);
    ++probes;
    iterations += r.iterations;
    if (r.status == SolveStatus::Undecided) ++undecided;
    if (r.status == SolveStatus::Feasible) warm = r.state;
    trace.push_back({T, r.status, r.iterations});
    return r;
  }

  void fill(SearchResult& out) const {
    out.probes = probes;
    out.undecided = undecided;
    out.iterations = iterations;
    out.trace = trace;
  }
};

}  // namespace

SearchResult search_max_moment(const EmpiricalMoments& m, const DirectionConfig& cfg, double resolution) {
  cfg.validate();
  if (!(resolution > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "resolution must be positive");
  Search sr(m, 2 * cfg.s, 1.0, 2 * cfg.s);
  SearchResult out;
  double lo = 0.0, hi = std::pow(1.0 / cfg.pmin, cfg.s);
  SolveResult first = sr.probe(lo, cfg);
  if (first.status != SolveStatus::Feasible) throw Error(ErrorCode::EstimationFailed, "unit sphere relaxation not feasible");
  out.pe = first.pe;
  lo = std::max(lo, apply(*first.pe, sr.form));
  while (hi - lo > resolution && sr.probes < cfg.max_probes) {
    const double mid = 0.5 * (lo + hi);
    SolveResult r = sr.probe(mid, cfg);
    if (r.status == SolveStatus::Feasible) {
      lo = std::max(mid, apply(*r.pe, sr.form));
      out.pe = r.pe;
    } else {
      hi = mid;
    }
  }
  out.T = lo;
  out.lo = lo;
  out.hi = hi;
  sr.fill(out);
  return out;
}

SearchResult search_min_moment(const EmpiricalMoments& m, const DirectionConfig& cfg, double resolution) {
  cfg.validate();
  if (!(resolution > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "resolution must be positive");
  Search sr(m, 2 * cfg.t, -1.0, 2 * cfg.t);
  SearchResult out;
  double lo = 0.0, hi = std::pow(1.0 / cfg.pmin + std::numbers::e * cfg.t, cfg.t);
  SolveResult first = sr.probe(hi, cfg);
  if (first.status != SolveStatus::Feasible) throw Error(ErrorCode::EstimationFailed, "upper end of the search interval not feasible");
  out.pe = first.pe;
  hi = std::min(hi, apply(*first.pe, sr.form));
  while (hi - lo > resolution && sr.probes < cfg.max_probes) {
    const double mid = 0.5 * (lo + hi);
    SolveResult r = sr.probe(mid, cfg);
    if (r.status == SolveStatus::Feasible) {
      hi = std::min(mid, apply(*r.pe, sr.form));
      out.pe = r.pe;
    } else {
      lo = mid;
    }
  }
  out.T = hi;
  out.lo = lo;
  out.hi = hi;
  sr.fill(out);
  return out;
}

Eigen::MatrixXd second_moment_matrix(const PseudoExpectation& pe) {
  const int d = pe.dim();
  Eigen::MatrixXd M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Exponent e(d, 0);
      ++e[i];
      ++e[j];
      M(i, j) = pe.moment(e);
    }
  return M;
}

Rank1 round_rank1(const Eigen::MatrixXd& M_in) {
  if (M_in.rows() != M_in.cols() || M_in.rows() == 0) throw Error(ErrorCode::PreconditionFailed, "matrix must be square");
  Eigen::MatrixXd M = 0.5 * (M_in + M_in.transpose());
  const double tr = M.trace();
  if (tr > 0.0) M /= tr;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  const Eigen::VectorXd ev = es.eigenvalues();
  if (ev[0] < -1e-6) throw Error(ErrorCode::PreconditionFailed, "matrix is not positive semidefinite");
  const Eigen::Index n = ev.size();
  Rank1 out;
  out.top = ev[n - 1];
  out.second = n > 1 ? ev[n - 2] : 0.0;
  out.degenerate = n > 1 && out.top - out.second <= 1e-12;
  out.u = es.eigenvectors().col(n - 1).normalized();
  Eigen::Index arg;
  out.u.cwiseAbs().maxCoeff(&arg);
  if (out.u[arg] < 0.0) out.u = -out.u;
  return out;
}

double estimate_sigma_sq(const SampleSet& whitened, std::uint64_t seed) {
  const SampleSet z = pair_differences(whitened, default_max_pairs(whitened.n()), seed);
  const EmpiricalMoments zm = accumulate(z, {2});
  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 64; ++i) best = std::min(best, directional_moment_empirical(zm, rng.unit_vector(whitened.d()), 2) / 2.0);
  if (!std::isfinite(best)) throw Error(ErrorCode::EstimationFailed, "sigma estimate is not finite");
  return std::max(best, 1e-6);
}

namespace {

// λ_max of the d^s × d^s flattening bounds Ê⟨y,v⟩^{2s} over unit v.
double flattening_bound(const SymmetricTensor& T, int s) {
  const int d = T.dim();
  long n = 1;
  for (int i = 0; i < s; ++i) n *= d;
  Eigen::MatrixXd F(n, n);
  std::vector<int> ab(2 * s);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      long x = i, y = j;
      for (int r = 0; r < s; ++r) {
        ab[r] = static_cast<int>(x % d);
        ab[s + r] = static_cast<int>(y % d);
        x /= d;
        y /= d;
      }
      std::sort(ab.begin(), ab.end());
      F(i, j) = T.at(ab);
    }
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(F, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

}  // namespace

DirectionResult recover_direction(const EmpiricalMoments& m, const DirectionConfig& cfg, double sigma_sq,
                                  const std::optional<Eigen::VectorXd>& truth) {
  cfg.validate();
  if (!std::isfinite(sigma_sq) || !(sigma_sq > 0.0)) throw Error(ErrorCode::EstimationFailed, "sigma_sq must be finite and positive");
  const double tau = cfg.tau > 0.0 ? cfg.tau : 800.0 * std::numbers::e / (cfg.C_sep * cfg.k * cfg.k);
  const double M = sigma_sq >= tau ? cfg.C_sep * cfg.k * cfg.k * sigma_sq / (200.0 * std::numbers::e) : 4.0;
  const double res_u = cfg.resolution_u > 0.0 ? cfg.resolution_u : sigma_sq / (100.0 * M);
  const double res_l = cfg.resolution_l > 0.0 ? cfg.resolution_l : sigma_sq / 10000.0;
  const double test_level = std::pow(50.0 * cfg.s, cfg.s);

  DirectionResult out;
  out.sigma_sq = sigma_sq;
  auto take = [&](const SearchResult& sr) {
    out.probes += sr.probes;
    out.undecided += sr.undecided;
    out.iterations += sr.iterations;
    const Rank1 r = round_rank1(second_moment_matrix(*sr.pe));
    out.degenerate = out.degenerate || r.degenerate;
    return r.u;
  };

  bool run_max = true;
  if (sigma_sq < tau && flattening_bound(m.tensor(2 * cfg.s), cfg.s) < test_level) {
    run_max = false;
    out.reason = "moment test cannot pass";
  }
  if (run_max) {
    const SearchResult up = search_max_moment(m, cfg, res_u);
    out.T_U = up.T;
    out.trace_u = up.trace;
    out.u_hat = take(up);
    out.moment_test = directional_moment_empirical(m, out.u_hat, 2 * cfg.s);
    if (sigma_sq >= tau) {
      out.branch = "max";
      out.reason = "sigma_sq >= tau";
    } else if (*out.moment_test >= test_level) {
      out.branch = "max";
      out.reason = "moment test passed";
    } else {
      out.reason = "moment test failed";
    }
  }
  if (out.branch.empty()) {
    const SearchResult low = search_min_moment(m, cfg, res_l);
    out.T_L = low.T;
    out.trace_l = low.trace;
    out.u_hat = take(low);
    out.branch = "min";
  }
  if (truth) {
    const double c = truth->dot(out.u_hat);
    out.correlation = c * c / truth->squaredNorm();
  }
  return out;
}

}  // namespace psos
