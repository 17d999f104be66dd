#include <algorithm>
#include <cmath>
#include <optional>

#include "psos/error.hpp"
#include "psos/sos.hpp"

namespace psos {

namespace {

// r when q = a·(‖v‖² − r) for some a ≠ 0 (sign_required: a < 0 for an
// inequality, so that q ≥ 0 is the ball ‖v‖² ≤ r).
std::optional<double> ball_form(const Polynomial& q, int d, bool inequality) {
  if (q.degree() != 2) return std::nullopt;
  double a = 0.0;
  for (const auto& [e, c] : q.terms()) {
    const int deg = total_degree(e);
    if (deg == 1) return std::nullopt;
    if (deg == 2) {
      if (*std::max_element(e.begin(), e.end()) != 2) return std::nullopt;
      if (a == 0.0) a = c;
      if (std::abs(c - a) > 1e-14 * std::abs(a)) return std::nullopt;
    }
  }
  int diag_terms = 0;
  for (const auto& [e, c] : q.terms())
    if (total_degree(e) == 2) ++diag_terms;
  if (diag_terms != d) return std::nullopt;
  if (inequality && a >= 0.0) return std::nullopt;
  const double r = -q.coefficient(Exponent(d, 0)) / a;
  if (!(r > 0.0)) return std::nullopt;
  return r;
}

int ceil_half(int x) { return (x + 1) / 2; }

// 1×1 blocks are scaled by the norm of their L row, which ignores the constant.
double scalar_weight(const Polynomial& q) {
  const double c0 = q.coefficient(Exponent(q.dim(), 0));
  const double rest = std::sqrt(std::max(0.0, q.coefficient_norm() * q.coefficient_norm() - c0 * c0));
  if (rest > 0.0) return 1.0 / rest;
  return c0 != 0.0 ? 1.0 / std::abs(c0) : 1.0;
}

}  // namespace

std::vector<int> CompiledProblem::blocks_of_inequality(int i) const {
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(blocks.size()); ++j)
    if (blocks[j].kind == BlockKind::Localizing && blocks[j].source == i) out.push_back(j);
  return out;
}

void CompiledProblem::set_scalar_constant(int inequality_index, double constant) {
  const auto ids = blocks_of_inequality(inequality_index);
  if (ids.empty()) throw Error(ErrorCode::PreconditionFailed, "no block for inequality");
  for (int j : ids) {
    Block& blk = blocks[j];
    if (blk.size() != 1) throw Error(ErrorCode::PreconditionFailed, "set_scalar_constant needs a 1x1 localizing block");
    const Exponent zero(d, 0);
    blk.q.add_term(zero, constant - blk.q.coefficient(zero));
    c[blk.offset] = blk.weight * constant;
  }
}

std::vector<double> CompiledProblem::expand(const Eigen::VectorXd& x) const {
  std::vector<double> y(moments.size());
  for (int i = 0; i < moments.size(); ++i) y[i] = var_index[i] >= 0 ? x[var_index[i]] : fixed_value[i];
  return y;
}

Eigen::VectorXd CompiledProblem::restrict(const std::vector<double>& y) const {
  Eigen::VectorXd x(num_vars);
  for (int i = 0; i < moments.size(); ++i)
    if (var_index[i] >= 0) x[var_index[i]] = y[i];
  return x;
}

CompiledProblem compile(const ConstraintSystem& system, int d, int degree, const CompileOptions& opt) {
  if (degree < 0 || degree % 2 != 0) throw Error(ErrorCode::PreconditionFailed, "degree must be even and nonnegative");
  if (system.d != d) throw Error(ErrorCode::PreconditionFailed, "system dimension mismatch");
  if (!(system.bound_B > 0.0) || !std::isfinite(system.bound_B)) throw Error(ErrorCode::PreconditionFailed, "bound_B must be finite and positive");
  for (const auto* list : {&system.equalities, &system.inequalities})
    for (const auto& q : *list) {
      if (q.dim() != d) throw Error(ErrorCode::PreconditionFailed, "constraint dimension mismatch");
      if (q.degree() > degree) throw Error(ErrorCode::DegreeOverflow, "constraint degree exceeds relaxation degree");
    }

  CompiledProblem p;
  p.d = d;
  p.degree = degree;
  p.half = degree / 2;
  p.parity = opt.exploit_parity;
  for (const auto* list : {&system.equalities, &system.inequalities})
    for (const auto& q : *list) p.parity = p.parity && q.is_even();
  p.moments = MonomialBasis(d, degree);
  p.basis = MonomialBasis(d, p.half);

  p.var_index.assign(p.moments.size(), -1);
  p.fixed_value.assign(p.moments.size(), 0.0);
  p.fixed_value[0] = 1.0;
  for (int i = 1; i < p.moments.size(); ++i)
    if (!(p.parity && p.moments.degree(i) % 2 == 1)) p.var_index[i] = p.num_vars++;

  // Ball handling.
  std::optional<double> implied;
  for (const auto& q : system.equalities)
    if (auto r = ball_form(q, d, false); r && *r <= system.bound_B) implied = implied ? std::min(*implied, *r) : *r;
  for (const auto& q : system.inequalities)
    if (auto r = ball_form(q, d, true); r && *r <= system.bound_B) implied = implied ? std::min(*implied, *r) : *r;
  p.ball_radius = implied ? *implied : system.bound_B;

  auto add_blocks = [&](CompiledProblem::BlockKind kind, int source, const std::string& name, const Polynomial& q, double weight) {
    const int tq = p.half - ceil_half(std::max(q.degree(), 0));
    if (tq < 0) throw Error(ErrorCode::DegreeOverflow, "localizing degree below zero for " + name);
    const int end = p.basis.degree_start(tq + 1);
    for (int par = (p.parity ? 0 : -1); par <= (p.parity ? 1 : -1); ++par) {
      CompiledProblem::Block blk;
      blk.kind = kind;
      blk.source = source;
      blk.parity = par;
      blk.q = q;
      blk.weight = weight;
      blk.name = name + (par == 0 ? "/even" : par == 1 ? "/odd" : "");
      for (int i = 0; i < end; ++i)
        if (par < 0 || p.basis.degree(i) % 2 == par) blk.rows.push_back(i);
      if (!blk.rows.empty()) p.blocks.push_back(std::move(blk));
    }
  };
  add_blocks(CompiledProblem::BlockKind::Main, -1, "moment_matrix", Polynomial::constant(d, 1.0), 1.0);
  for (std::size_t i = 0; i < system.inequalities.size(); ++i) {
    const Polynomial& q = system.inequalities[i];
    if (q.is_zero()) continue;
    const bool scalar = p.half == ceil_half(q.degree());
    add_blocks(CompiledProblem::BlockKind::Localizing, static_cast<int>(i), system.inequality_names[i], q,
               scalar ? scalar_weight(q) : 1.0 / q.coefficient_norm());
  }
  if (!implied) {
    const Polynomial ball = Polynomial::constant(d, system.bound_B) - Polynomial::squared_norm(d);
    add_blocks(CompiledProblem::BlockKind::Ball, -1, "ball", ball, 1.0 / ball.coefficient_norm());
  }

  int offset = 0;
  for (auto& blk : p.blocks) {
    blk.offset = offset;
    offset += blk.svec_size();
  }
  p.c = Eigen::VectorXd::Zero(offset);
  std::vector<Eigen::Triplet<double>> trip;
  const double r2 = std::sqrt(2.0);
  Exponent e(d);
  for (const auto& blk : p.blocks) {
    std::vector<std::pair<Exponent, double>> qterms(blk.q.terms().begin(), blk.q.terms().end());
    for (int bcol = 0; bcol < blk.size(); ++bcol)
      for (int a = 0; a <= bcol; ++a) {
        const int pos = blk.offset + bcol * (bcol + 1) / 2 + a;
        const double scale = blk.weight * (a == bcol ? 1.0 : r2);
        const Exponent& ea = p.basis[blk.rows[a]];
        const Exponent& eb = p.basis[blk.rows[bcol]];
        for (const auto& [dq, cq] : qterms) {
          for (int j = 0; j < d; ++j) e[j] = ea[j] + eb[j] + dq[j];
          const int mi = p.moments.index(e);
          if (p.var_index[mi] >= 0)
            trip.emplace_back(pos, p.var_index[mi], scale * cq);
          else
            p.c[pos] += scale * cq * p.fixed_value[mi];
        }
      }
  }
  p.L.resize(offset, p.num_vars);
  p.L.setFromTriplets(trip.begin(), trip.end());
  p.L.makeCompressed();

  // Equalities Ẽ[v^γ q] = 0.
  trip.clear();
  std::vector<double> rhs;
  for (std::size_t qi = 0; qi < system.equalities.size(); ++qi) {
    const Polynomial& q = system.equalities[qi];
    if (q.is_zero()) continue;
    const int room = degree - q.degree();
    for (int g = 0; g < p.moments.degree_start(room + 1); ++g) {
      if (p.parity && p.moments.degree(g) % 2 == 1) continue;
      std::map<int, double> row;
      double b = 0.0;
      for (const auto& [dq, cq] : q.terms()) {
        for (int j = 0; j < d; ++j) e[j] = p.moments[g][j] + dq[j];
        const int mi = p.moments.index(e);
        if (p.var_index[mi] >= 0)
          row[p.var_index[mi]] += cq;
        else
          b -= cq * p.fixed_value[mi];
      }
      double norm = 0.0;
      for (const auto& [v, cv] : row) norm += cv * cv;
      norm = std::sqrt(norm);
      if (norm == 0.0) {
        if (std::abs(b) > 1e-12 * q.coefficient_norm()) p.inconsistent_equalities = true;
        continue;
      }
      const int r = static_cast<int>(rhs.size());
      for (const auto& [v, cv] : row) trip.emplace_back(r, v, cv / norm);
      rhs.push_back(b / norm);
      p.equality_row_names.push_back(system.equality_names[qi]);
    }
  }
  p.A.resize(static_cast<Eigen::Index>(rhs.size()), p.num_vars);
  p.A.setFromTriplets(trip.begin(), trip.end());
  p.A.makeCompressed();
  p.b = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));

  p.moment_bound.assign(p.num_vars, 0.0);
  for (int i = 0; i < p.moments.size(); ++i)
    if (p.var_index[i] >= 0) p.moment_bound[p.var_index[i]] = std::pow(p.ball_radius, 0.5 * p.moments.degree(i));
  return p;
}

namespace {

Eigen::MatrixXd unpack(const Eigen::VectorXd& s, int offset, int n) {
  Eigen::MatrixXd m(n, n);
  const double r2 = std::sqrt(2.0);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a <= b; ++a) {
      const double v = s[offset + b * (b + 1) / 2 + a];
      m(a, b) = m(b, a) = a == b ? v : v / r2;
    }
  return m;
}

}  // namespace

std::vector<Residual> evaluate_residuals(const CompiledProblem& p, const std::vector<double>& y) {
  std::vector<Residual> out;
  const Eigen::VectorXd x = p.restrict(y);
  const Eigen::VectorXd s = p.L * x + p.c;
  for (const auto& blk : p.blocks) {
    const Eigen::MatrixXd m = unpack(s, blk.offset, blk.size());
    const double mn = blk.size() == 1 ? m(0, 0) : Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()[0];
    out.push_back({"psd:" + blk.name, mn});
  }
  out.push_back({"eq:normalization", std::abs(y[0] - 1.0)});
  if (p.A.rows() > 0) {
    const Eigen::VectorXd r = p.A * x - p.b;
    std::map<std::string, double> worst;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      double& w = worst[p.equality_row_names[i]];
      w = std::max(w, std::abs(r[i]));
    }
    for (const auto& [name, v] : worst) out.push_back({"eq:" + name, v});
  }
  return out;
}

bool residuals_ok(const std::vector<Residual>& r, double tol) {
  for (const auto& x : r) {
    if (x.name.rfind("psd:", 0) == 0 && !(x.value >= -tol)) return false;
    if (x.name.rfind("eq:", 0) == 0 && !(x.value <= tol)) return false;
  }
  return true;
}

}  // namespace psos
