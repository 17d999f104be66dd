#include "psos/checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <gmpxx.h>

#include "psos/error.hpp"
#include "psos/rng.hpp"

namespace psos {

nlohmann::json to_json(const CheckReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["instances_tested"] = r.instances_tested;
  j["worst_violation"] = r.worst_violation;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  j["details"] = r.details;
  return j;
}

namespace {

bool even_positive(int x) { return x >= 2 && x % 2 == 0; }

double power_mean(const std::vector<double>& values, int r) {
  long double sum = 0.0L;
  for (double v : values) sum += std::pow(static_cast<long double>(v), r);
  return static_cast<double>(std::pow(sum / values.size(), 1.0L / r));
}

mpz_class double_factorial_z(int m) {
  mpz_class out = 1;
  for (int i = m; i > 1; i -= 2) out *= i;
  return out;
}

mpz_class binom_z(int n, int r) {
  mpz_class out;
  mpz_bin_uiui(out.get_mpz_t(), n, r);
  return out;
}

mpz_class pow_z(const mpz_class& b, unsigned e) {
  mpz_class out;
  mpz_pow_ui(out.get_mpz_t(), b.get_mpz_t(), e);
  return out;
}

mpq_class pow_q(const mpq_class& b, unsigned e) {
  mpq_class out = 1;
  for (unsigned i = 0; i < e; ++i) out *= b;
  return out;
}

// Relative excess of lhs over rhs; ≤ 0 when lhs ≤ rhs.
double excess(long double lhs, long double rhs) {
  const long double scale = std::max({1.0L, std::abs(lhs), std::abs(rhs)});
  return static_cast<double>((lhs - rhs) / scale);
}

}  // namespace

double moment_ratio(const std::vector<double>& values, int s, int t) {
  if (!even_positive(s) || !even_positive(t) || s > t) throw Error(ErrorCode::ParamOutOfRange, "need even 2 ≤ s ≤ t");
  if (values.empty() || std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; }))
    throw Error(ErrorCode::PreconditionFailed, "values must not all be zero");
  return power_mean(values, s) / power_mean(values, t);
}

double gaussian_moment_ratio(int s, int t) {
  if (!even_positive(s) || !even_positive(t) || s > t) throw Error(ErrorCode::ParamOutOfRange, "need even 2 ≤ s ≤ t");
  return std::pow(double_factorial_z(s - 1).get_d(), 1.0 / s) / std::pow(double_factorial_z(t - 1).get_d(), 1.0 / t);
}

CheckReport check_moment_ratio_sandwich(const std::vector<double>& values, int s, int t) {
  CheckReport r;
  r.name = "moment_ratio_sandwich";
  const double ratio = moment_ratio(values, s, t);
  const double lower = std::pow(static_cast<double>(values.size()), -1.0 / s);
  r.instances_tested = 1;
  r.worst_violation = std::max(lower - ratio, ratio - 1.0);
  r.details = {{"ratio", ratio}, {"lower", lower}, {"k", values.size()}, {"s", s}, {"t", t}};
  r.finish();
  return r;
}

CheckReport check_moment_ratio_sweep(int trials, int t_max, std::uint64_t seed) {
  CheckReport r;
  r.name = "moment_ratio_sandwich_sweep";
  r.worst_violation = -1.0;
  Rng rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(16));
    std::vector<double> v(k);
    const int kind = static_cast<int>(rng.below(3));
    for (double& x : v) x = kind == 0 ? rng.normal() : kind == 1 ? rng.uniform(-1.0, 1.0) : (rng.uniform() < 0.3 ? rng.normal() : 0.0);
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
    for (int s = 2; s <= t_max; s += 2)
      for (int t = s; t <= t_max; t += 2) {
        r.worst_violation = std::max(r.worst_violation, check_moment_ratio_sandwich(v, s, t).worst_violation);
        ++r.instances_tested;
      }
  }
  r.details = {{"trials", trials}, {"t_max", t_max}, {"seed", seed}};
  r.finish();
  return r;
}

CheckReport check_binom_double_factorial(int t_max) {
  if (t_max < 0 || t_max > 20) throw Error(ErrorCode::ParamOutOfRange, "t_max must lie in [0, 20]");
  CheckReport r;
  r.name = "binom_double_factorial";
  r.tolerance = 0.0;
  // Rational lower bound on e; an upper bound that holds with it holds with e.
  const mpq_class e_lo("2718281828459045/1000000000000000");
  double worst = -1.0;
  long failures = 0;
  for (int t = 0; t <= t_max; ++t)
    for (int s = 0; s <= t; ++s) {
      const mpz_class lhs = binom_z(2 * t, 2 * s) * double_factorial_z(2 * t - 2 * s - 1);
      const mpz_class c = binom_z(t, s);
      const unsigned e = static_cast<unsigned>(t - s);
      const mpq_class upper = mpq_class(c) * pow_q(e_lo * t, e);
      const mpq_class lower = mpq_class(c * pow_z(t, e), pow_z(2, e));
      const mpq_class lq(lhs);
      if (!(lq <= upper && lower <= lq)) ++failures;
      worst = std::max({worst, mpq_class(lq / upper - 1).get_d(), mpq_class(lower / lq - 1).get_d()});
      ++r.instances_tested;
    }
  r.worst_violation = worst;
  r.details = {{"t_max", t_max}, {"exact_failures", failures}, {"e_lower", "2718281828459045/10^15"}};
  r.finish();
  return r;
}

namespace {

// Grid minimum of f on [−50, 50] with golden-section refinement around grid minima.
long double grid_min(const std::function<long double(long double)>& f, int grid, const std::vector<long double>& extra) {
  std::vector<long double> xs(grid), fs(grid);
  long double best = std::numeric_limits<long double>::infinity();
  for (int i = 0; i < grid; ++i) {
    xs[i] = -50.0L + 100.0L * i / (grid - 1);
    fs[i] = f(xs[i]);
    best = std::min(best, fs[i]);
  }
  for (long double x : extra) best = std::min(best, f(x));
  const long double g = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  for (int i = 1; i + 1 < grid; ++i) {
    if (!(fs[i] <= fs[i - 1] && fs[i] <= fs[i + 1])) continue;
    long double a = xs[i - 1], b = xs[i + 1];
    long double c = b - g * (b - a), d = a + g * (b - a);
    long double fc = f(c), fd = f(d);
    for (int it = 0; it < 100; ++it) {
      if (fc < fd) {
        b = d, d = c, fd = fc;
        c = b - g * (b - a), fc = f(c);
      } else {
        a = c, c = d, fc = fd;
        d = a + g * (b - a), fd = f(d);
      }
    }
    best = std::min({best, fc, fd});
  }
  return best;
}

long double ipow(long double x, int t) {
  long double out = 1.0L;
  for (int i = 0; i < t; ++i) out *= x;
  return out;
}

void require_params(const PowerTransferParams& p, int grid) {
  auto fail = [](const char* what) { throw Error(ErrorCode::ParamOutOfRange, what); };
  if (grid < 3) fail("grid needs at least 3 points");
  for (int t : p.t_values)
    if (!even_positive(t) || t > 12) fail("t must be even in [2, 12]");
  for (double g : p.gamma_lower)
    if (!(g > 1.0)) fail("lower transfer needs γ > 1");
  for (double g : p.gamma_upper)
    if (!(g > 0.0)) fail("upper transfer needs γ > 0");
  for (double m : p.M_values)
    if (!(m >= 2.0)) fail("M must be at least 2");
  for (double s : p.sigma_lower)
    if (!(s >= 0.0 && s < 1.0)) fail("σ² must lie in [0, 1)");
  for (double d : p.Delta_values)
    if (!(d >= 10.0)) fail("Δ must be at least 10");
  for (double s : p.sigma_upper)
    if (!(s >= 0.0 && s < 0.1)) fail("σ² must lie in [0, 0.1)");
  for (double g : p.gamma_main_upper)
    if (!(g >= 0.9)) fail("γ must be at least 0.9");
  if (p.random_pairs < 0) fail("random_pairs must be nonnegative");
}

}  // namespace

CheckReport check_power_transfer_lemmas(int grid, const PowerTransferParams& p) {
  require_params(p, grid);
  CheckReport r;
  r.name = "power_transfer";
  long double worst = -std::numeric_limits<long double>::infinity();
  nlohmann::json families = nlohmann::json::object();
  auto record = [&](const std::string& family, long double minimum) {
    const double v = static_cast<double>(-minimum);
    worst = std::max(worst, -minimum);
    auto& slot = families[family];
    if (slot.is_null()) slot = {{"instances", 0}, {"worst_violation", -1e300}};
    slot["instances"] = slot["instances"].get<long>() + 1;
    slot["worst_violation"] = std::max(slot["worst_violation"].get<double>(), v);
    ++r.instances_tested;
  };
  const std::vector<long double> anchors = {0.0L, 1.0L, -1.0L};

  for (int t : p.t_values) {
    for (double gd : p.gamma_lower) {
      const long double g = gd;
      record("aid_lower", grid_min([&](long double x) { return ipow(1 + g * (x - 1), t) - 1 - g * (ipow(x, t) - 1); }, grid, anchors));
    }
    for (double gd : p.gamma_upper) {
      const long double g = gd;
      record("aid_upper", grid_min([&](long double x) { return ipow(1 + g * (1 - x), t) - 1 - g * (1 - ipow(x, t)); }, grid, anchors));
    }
  }

  // Random p, q meeting the linear hypotheses: q = 1 + γ(p − 1) + c(x − x0)², resp. 1 + γ(1 − p) + c(x − x0)².
  Rng rng(p.seed);
  for (int i = 0; i < p.random_pairs; ++i) {
    const int t = p.t_values[rng.below(p.t_values.size())];
    const long double a = rng.uniform(0.0, 2.0), b = rng.uniform(0.0, 2.0), c = rng.uniform(0.0, 2.0), x0 = rng.uniform(-3.0, 3.0);
    const long double gl = p.gamma_lower[rng.below(p.gamma_lower.size())];
    auto pl = [=](long double x) { return a * x * x + b; };
    auto ql = [=](long double x) { return 1 + gl * (pl(x) - 1) + c * (x - x0) * (x - x0); };
    record("aid_lower_random", grid_min([&](long double x) { return ipow(ql(x), t) - 1 - gl * (ipow(pl(x), t) - 1); }, grid, {x0}));
    const long double gu = p.gamma_upper[rng.below(p.gamma_upper.size())];
    const long double a2 = rng.uniform(-2.0, 2.0), b2 = rng.uniform(-2.0, 2.0);
    auto pu = [=](long double x) { return a2 * x * x + b2 * x + b; };
    auto qu = [=](long double x) { return 1 + gu * (1 - pu(x)) + c * (x - x0) * (x - x0); };
    record("aid_upper_random", grid_min([&](long double x) { return ipow(qu(x), t) - 1 - gu * (1 - ipow(pu(x), t)); }, grid, {x0}));
  }

  const std::vector<double> fractions = {0.1, 0.5, 0.75, 0.95};  // γ = fraction · M
  std::vector<int> levels = {1};
  levels.insert(levels.end(), p.t_values.begin(), p.t_values.end());
  for (int t : levels)
    for (double Md : p.M_values)
      for (double fr : fractions)
        for (double sd : p.sigma_lower) {
          const long double M = Md, g = fr * Md, s2 = sd;
          const long double delta = g / (M - g), Gamma = M * delta / g;
          auto pf = [=](long double x) { return g * ((M - 1 + s2) / M * x * x + 1 / M); };
          auto qf = [=](long double x) { return delta * (M - 1 + s2) * x * x; };
          record("main_lower", grid_min([&](long double x) { return ipow(qf(x), t) - 1 - Gamma * (ipow(pf(x), t) - 1); }, grid, anchors));
        }
  for (int t : levels)
    for (double Dd : p.Delta_values)
      for (double gd : p.gamma_main_upper)
        for (double sd : p.sigma_upper) {
          const long double D = Dd, g = gd, s2 = sd;
          const long double delta = g * (D - 1) / (g * D - 1);
          const long double Gamma = delta * (1 + 8 * D * s2) / (g * (D * (1 - s2) - 1) * (1 - 10 * s2));
          auto pf = [=](long double x) { return g * ((1 - D * (1 - s2)) * x * x + D) / (1 + 8 * D * s2); };
          auto qf = [=](long double x) { return delta * x * x / (1 - 10 * s2); };
          record("main_upper", grid_min([&](long double x) { return ipow(qf(x), t) - 1 - Gamma * (1 - ipow(pf(x), t)); }, grid, anchors));
        }
  // Second root of the σ² quadratic stays at or above 0.1.
  for (double Dd : p.Delta_values)
    for (double gd : p.gamma_main_upper) {
      const long double D = Dd, g = gd;
      const long double root = (11 * g * D * D - 10 * g * D - 8 * D * D - 3 * D + 10) / (10 * D * (g * D - 1));
      record("main_upper_root", root - 0.1L);
    }
  r.worst_violation = static_cast<double>(worst);
  r.details = {{"grid", grid}, {"families", families}};
  r.finish();
  return r;
}

CheckReport check_scalar_sos_inequalities(long trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::ParamOutOfRange, "trials must be positive");
  CheckReport r;
  r.name = "scalar_sos_inequalities";
  Rng rng(seed);
  nlohmann::json lemmas = nlohmann::json::object();
  double worst = -1e300;
  auto run = [&](const std::string& name, const std::function<double()>& draw) {
    double w = -1e300;
    for (long i = 0; i < trials; ++i) w = std::max(w, draw());
    lemmas[name] = {{"instances", trials}, {"worst_violation", w}};
    worst = std::max(worst, w);
    r.instances_tested += trials;
  };
  auto even_t = [&] { return 2 * (1 + static_cast<int>(rng.below(6))); };
  auto scalar = [&] { return rng.normal() * std::exp(rng.uniform(-2.0, 2.0)); };

  run("triangle", [&] {
    const int t = even_t();
    const long double A = scalar(), B = scalar();
    return excess(ipow(A + B, t), std::ldexp(1.0L, t - 1) * (ipow(A, t) + ipow(B, t)));
  });
  run("triangle_delta", [&] {
    const int t = even_t();
    const long double A = scalar(), B = scalar(), d = std::exp(rng.uniform(-4.0, 4.0));
    return excess(ipow(A + B, t), ipow(1 + d, t - 1) * ipow(A, t) + ipow(1 + 1 / d, t - 1) * ipow(B, t));
  });
  run("am_gm", [&] {
    const int t = even_t();
    long double prod = 1.0L, sum = 0.0L;
    for (int i = 0; i < t; ++i) {
      const long double x = scalar();
      prod *= x;
      sum += ipow(x, t);
    }
    return excess(prod, sum / t);
  });
  run("cauchy_schwarz", [&] {
    const int d = 1 + static_cast<int>(rng.below(8));
    std::vector<long double> u(d), v(d);
    long double uv = 0.0L, uu = 0.0L, vv = 0.0L;
    for (int i = 0; i < d; ++i) {
      u[i] = scalar(), v[i] = scalar();
      uv += u[i] * v[i], uu += u[i] * u[i], vv += v[i] * v[i];
    }
    long double lagrange = 0.0L;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) lagrange += ipow(u[i] * v[j] - u[j] * v[i], 2);
    // ‖u‖²‖v‖² − ⟨u,v⟩² equals the Lagrange sum of squares.
    const double identity = static_cast<double>(std::abs(uu * vv - uv * uv - lagrange) / std::max(1.0L, uu * vv));
    return std::max(excess(uv * uv, uu * vv), identity - 1e-15);
  });
  run("boost", [&] {
    const int t = 1 + static_cast<int>(rng.below(12));
    const long double C = rng.uniform(2.0, 100.0);
    const long double X = rng.uniform() < 0.01 ? 0.0L : rng.uniform(0.0, 1.0 / (C * t));
    return excess(ipow(1 - X, t), 1 - (C - 2) / (C - 1) * t * X);
  });
  run("root_bound", [&] {
    const int t = even_t();
    const long double X = rng.uniform(-1.0, 1.0);
    return ipow(X, t) <= 1.0L ? excess(X, 1.0L) : -1.0;
  });
  run("power_upper", [&] {
    const int t = 1 + static_cast<int>(rng.below(12));
    const long double X = rng.uniform();
    return excess(ipow(X, t), 1.0L);
  });
  run("power_lower", [&] {
    const int t = static_cast<int>(rng.below(13));
    const long double X = std::abs(scalar());
    return excess(0.0L, ipow(X, t));
  });
  run("lower_bound_root", [&] {
    const int t = 1 + static_cast<int>(rng.below(12));
    const long double X = rng.uniform();
    const long double delta = rng.uniform(-1.0, static_cast<double>(ipow(X, t)));
    return excess(delta, X);
  });
  r.worst_violation = worst;
  r.details = {{"trials_per_lemma", trials}, {"seed", seed}, {"lemmas", lemmas}};
  r.finish();
  return r;
}

DistinguisherRow distinguisher(int k) {
  if (k < 2) throw Error(ErrorCode::ParamOutOfRange, "k must be at least 2");
  DistinguisherRow row;
  row.k = k;
  row.s = 2;
  while (pow_z(2, row.s) < k) row.s += 2;
  const mpz_class ms = double_factorial_z(row.s - 1);
  // Gaussian ratio < 1/2 ⇔ 2^{st} ((s−1)!!)^t < ((t−1)!!)^s.
  for (row.t = row.s + 2; row.t <= 400; row.t += 2) {
    const unsigned s = row.s, t = row.t;
    if (pow_z(2, s * t) * pow_z(ms, t) < pow_z(double_factorial_z(t - 1), s)) break;
  }
  if (row.t > 400) throw Error(ErrorCode::ParamOutOfRange, "no t found");
  row.discrete_min = std::pow(static_cast<double>(k), 1.0 / row.t - 1.0 / row.s);
  row.gaussian = gaussian_moment_ratio(row.s, row.t);
  // Discrete ratio ≥ 1/2 ⇔ 2^{st} ≥ k^{t−s}.
  const bool discrete_ok = pow_z(2, row.s * row.t) >= pow_z(k, row.t - row.s);
  row.pass = discrete_ok && row.gaussian < 0.5;
  return row;
}

CheckReport check_distinguisher(const std::vector<int>& ks) {
  CheckReport r;
  r.name = "distinguisher";
  r.worst_violation = -1.0;
  r.details["rows"] = nlohmann::json::array();
  Rng rng(7);
  for (int k : ks) {
    const DistinguisherRow row = distinguisher(k);
    double worst = std::max(0.5 - row.discrete_min, row.gaussian - 0.5);
    if (!row.pass) worst = std::max(worst, 1e-300);
    // Random uniform-on-k value sets stay above the discrete minimum.
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> v(k);
      for (double& x : v) x = rng.uniform() < 0.5 ? 0.0 : rng.normal();
      if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
      worst = std::max(worst, 0.5 - moment_ratio(v, row.s, row.t));
      ++r.instances_tested;
    }
    r.worst_violation = std::max(r.worst_violation, worst);
    r.details["rows"].push_back(
        {{"k", k}, {"s", row.s}, {"t", row.t}, {"discrete_min", row.discrete_min}, {"gaussian", row.gaussian}, {"pass", row.pass}});
  }
  r.finish();
  return r;
}

std::vector<CheckReport> run_all_checks(std::uint64_t seed) {
  std::vector<CheckReport> out;
  CheckReport ex = check_moment_ratio_sandwich({-1.0, 1.0}, 2, 4);
  ex.name = "moment_ratio_sandwich_pm1";
  out.push_back(ex);
  ex = check_moment_ratio_sandwich({0.0, 0.0, 0.0, 2.0}, 2, 4);
  ex.name = "moment_ratio_sandwich_one_nonzero";
  out.push_back(ex);
  out.push_back(check_moment_ratio_sweep(2000, 12, seed));
  out.push_back(check_binom_double_factorial(20));
  PowerTransferParams pt;
  pt.seed = seed;
  out.push_back(check_power_transfer_lemmas(20001, pt));
  out.push_back(check_scalar_sos_inequalities(100000, seed));
  out.push_back(check_distinguisher());
  return out;
}

}  // namespace psos
