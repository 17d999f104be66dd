#include <cmath>
#include <fstream>

#include <json.hpp>

#include "psos/error.hpp"
#include "psos/sos.hpp"

namespace psos {

namespace {

void generate(int d, int pos, int remaining, Exponent& e, std::vector<Exponent>& out) {
  if (pos == d - 1) {
    e[pos] = remaining;
    out.push_back(e);
    return;
  }
  for (int x = remaining; x >= 0; --x) {
    e[pos] = x;
    generate(d, pos + 1, remaining - x, e, out);
  }
}

}  // namespace

MonomialBasis::MonomialBasis(int d, int max_degree) : d_(d), max_degree_(max_degree) {
  if (d < 1 || max_degree < 0) throw Error(ErrorCode::PreconditionFailed, "bad basis shape");
  if (MultisetCodec::count(d + 1, max_degree) > kMaxBasisSize) throw Error(ErrorCode::BasisTooLarge, "monomial basis exceeds 1e7");
  Exponent e(d, 0);
  for (int g = 0; g <= max_degree; ++g) {
    starts_.push_back(static_cast<int>(monos_.size()));
    generate(d, 0, g, e, monos_);
  }
  starts_.push_back(static_cast<int>(monos_.size()));
  for (int i = 0; i < size(); ++i) {
    lookup_.emplace(monos_[i], i);
    degrees_.push_back(total_degree(monos_[i]));
  }
  succ_.assign(static_cast<std::size_t>(size()) * d, -1);
  for (int i = 0; i < size(); ++i) {
    if (degrees_[i] == max_degree) continue;
    Exponent f = monos_[i];
    for (int j = 0; j < d; ++j) {
      ++f[j];
      succ_[static_cast<std::size_t>(i) * d + j] = lookup_.at(f);
      --f[j];
    }
  }
}

int MonomialBasis::index(const Exponent& e) const {
  auto it = lookup_.find(e);
  return it == lookup_.end() ? -1 : it->second;
}

void ConstraintSystem::add_equality(Polynomial q, std::string name) {
  if (name.empty()) name = "eq" + std::to_string(equalities.size());
  equalities.push_back(std::move(q));
  equality_names.push_back(std::move(name));
}

void ConstraintSystem::add_inequality(Polynomial q, std::string name) {
  if (name.empty()) name = "ineq" + std::to_string(inequalities.size());
  inequalities.push_back(std::move(q));
  inequality_names.push_back(std::move(name));
}

ConstraintSystem sphere_system(int d, double bound_B) {
  ConstraintSystem s;
  s.d = d;
  s.bound_B = bound_B;
  s.add_equality(Polynomial::squared_norm(d) - Polynomial::constant(d, 1.0), "unit_norm");
  return s;
}

ConstraintSystem substitute_linear(const ConstraintSystem& sys, const Eigen::MatrixXd& A, double bound_B) {
  ConstraintSystem out;
  out.d = static_cast<int>(A.cols());
  out.bound_B = bound_B;
  for (std::size_t i = 0; i < sys.equalities.size(); ++i)
    out.add_equality(sys.equalities[i].substitute_linear(A), sys.equality_names[i]);
  for (std::size_t i = 0; i < sys.inequalities.size(); ++i)
    out.add_inequality(sys.inequalities[i].substitute_linear(A), sys.inequality_names[i]);
  return out;
}

double PseudoExpectation::moment(const Exponent& e) const {
  const int i = moments.index(e);
  if (i < 0) throw Error(ErrorCode::DegreeOverflow, "monomial above pseudo-expectation degree");
  return moment_vector[i];
}

PseudoExpectation make_pseudo_expectation(MonomialBasis basis, MonomialBasis moments, std::vector<double> values) {
  PseudoExpectation pe;
  const int n = basis.size();
  pe.moment_matrix.resize(n, n);
  Exponent e(basis.dim());
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      for (int j = 0; j < basis.dim(); ++j) e[j] = basis[a][j] + basis[b][j];
      pe.moment_matrix(a, b) = pe.moment_matrix(b, a) = values[moments.index(e)];
    }
  pe.basis = std::move(basis);
  pe.moments = std::move(moments);
  pe.moment_vector = std::move(values);
  return pe;
}

PseudoExpectation point_mass(int d, int degree, const Eigen::VectorXd& v0) {
  MonomialBasis moments(d, degree);
  std::vector<double> y(moments.size());
  for (int i = 0; i < moments.size(); ++i) {
    double m = 1.0;
    for (int j = 0; j < d; ++j) m *= std::pow(v0[j], moments[i][j]);
    y[i] = m;
  }
  return make_pseudo_expectation(MonomialBasis(d, degree / 2), std::move(moments), std::move(y));
}

PseudoExpectation pullback(const PseudoExpectation& pe_w, const Eigen::MatrixXd& A) {
  const int dv = static_cast<int>(A.rows()), dw = static_cast<int>(A.cols());
  if (dw != pe_w.dim()) throw Error(ErrorCode::PreconditionFailed, "pullback dimension mismatch");
  const int degree = pe_w.degree();
  const MonomialBasis& mw = pe_w.moments;
  MonomialBasis mv(dv, degree);
  // poly[γ] holds (A w)^γ as dense coefficients over w-monomials of degree |γ|.
  std::vector<std::vector<double>> poly(mv.size());
  std::vector<double> y(mv.size(), 0.0);
  poly[0] = {1.0};
  y[0] = pe_w.moment_vector[0];
  for (int g = 1; g < mv.size(); ++g) {
    const Exponent& e = mv[g];
    int i = 0;
    while (e[i] == 0) ++i;
    Exponent prev = e;
    --prev[i];
    const int p = mv.index(prev);
    const int deg = mv.degree(g);
    const int lo_prev = mw.degree_start(deg - 1), lo = mw.degree_start(deg);
    std::vector<double> out(mw.degree_start(deg + 1) - lo, 0.0);
    const auto& src = poly[p];
    for (std::size_t k = 0; k < src.size(); ++k) {
      if (src[k] == 0.0) continue;
      for (int j = 0; j < dw; ++j)
        if (A(i, j) != 0.0) out[mw.successor(lo_prev + static_cast<int>(k), j) - lo] += src[k] * A(i, j);
    }
    double val = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) val += out[k] * pe_w.moment_vector[lo + k];
    y[g] = val;
    poly[g] = std::move(out);
  }
  PseudoExpectation pe = make_pseudo_expectation(MonomialBasis(dv, degree / 2), std::move(mv), std::move(y));
  pe.residuals = pe_w.residuals;
  return pe;
}

double apply(const PseudoExpectation& pe, const Polynomial& p) {
  if (p.dim() != pe.dim()) throw Error(ErrorCode::PreconditionFailed, "polynomial dimension mismatch");
  double total = 0.0;
  for (const auto& [e, c] : p.terms()) {
    const int i = pe.moments.index(e);
    if (i < 0) throw Error(ErrorCode::DegreeOverflow, "polynomial degree exceeds pseudo-expectation degree");
    total += c * pe.moment_vector[i];
  }
  return total;
}

SymmetricTensor extract_even_form(const PseudoExpectation& pe, int s) {
  if (2 * s > pe.degree()) throw Error(ErrorCode::DegreeOverflow, "2s exceeds pseudo-expectation degree");
  SymmetricTensor t(pe.dim(), 2 * s);
  t.for_each([&](std::size_t rank, const std::vector<int>& idx) { t.values()[rank] = pe.moment(to_exponent(idx, pe.dim())); });
  return t;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Undecided: return "undecided";
  }
  return "unknown";
}

void write_pseudo_expectation(const std::string& path, const PseudoExpectation& pe) {
  Eigen::MatrixXd col(pe.moment_vector.size(), 1);
  for (std::size_t i = 0; i < pe.moment_vector.size(); ++i) col(i, 0) = pe.moment_vector[i];
  write_matrix_container(path, "PTEN", col);
  nlohmann::json rep;
  rep["dimension"] = pe.dim();
  rep["degree"] = pe.degree();
  nlohmann::json idx = nlohmann::json::array();
  for (int i = 0; i < pe.moments.size(); ++i) idx.push_back(to_sorted(pe.moments[i]));
  rep["multi_indices"] = idx;
  nlohmann::json res = nlohmann::json::object();
  for (const auto& r : pe.residuals) res[r.name] = r.value;
  rep["residuals"] = res;
  std::ofstream os(path + ".json");
  os << rep.dump(1) << "\n";
}

}  // namespace psos
