#include "psos/polynomial.hpp"

#include <cmath>
#include <sstream>

#include "psos/error.hpp"

namespace psos {

int total_degree(const Exponent& e) {
  int s = 0;
  for (int x : e) s += x;
  return s;
}

double multinomial(const Exponent& e) {
  double r = 1.0;
  int n = 0;
  for (int x : e)
    for (int j = 1; j <= x; ++j) r = r * (++n) / j;
  return std::round(r);
}

Polynomial Polynomial::constant(int d, double c) {
  Polynomial p(d);
  p.add_term(Exponent(d, 0), c);
  return p;
}

Polynomial Polynomial::variable(int d, int i) {
  Polynomial p(d);
  Exponent e(d, 0);
  e[i] = 1;
  p.add_term(e, 1.0);
  return p;
}

Polynomial Polynomial::linear_form(const Eigen::VectorXd& a) {
  const int d = static_cast<int>(a.size());
  Polynomial p(d);
  for (int i = 0; i < d; ++i) {
    Exponent e(d, 0);
    e[i] = 1;
    p.add_term(e, a[i]);
  }
  return p;
}

Polynomial Polynomial::quadratic_form(const Eigen::MatrixXd& Q) {
  const int d = static_cast<int>(Q.rows());
  Polynomial p(d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      Exponent e(d, 0);
      ++e[i];
      ++e[j];
      p.add_term(e, i == j ? Q(i, i) : Q(i, j) + Q(j, i));
    }
  return p;
}

double Polynomial::coefficient(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Exponent& e, double c) {
  if (static_cast<int>(e.size()) != d_) throw Error(ErrorCode::PreconditionFailed, "exponent dimension mismatch");
  if (c == 0.0) return;
  auto [it, inserted] = terms_.emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

int Polynomial::degree() const {
  int deg = -1;
  for (const auto& [e, c] : terms_) deg = std::max(deg, total_degree(e));
  return deg;
}

bool Polynomial::is_even() const {
  for (const auto& [e, c] : terms_)
    if (total_degree(e) % 2 != 0) return false;
  return true;
}

double Polynomial::coefficient_norm() const {
  double s = 0.0;
  for (const auto& [e, c] : terms_) s += c * c;
  return std::sqrt(s);
}

double Polynomial::evaluate(const Eigen::VectorXd& v) const {
  double total = 0.0;
  for (const auto& [e, c] : terms_) {
    double m = c;
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < e[i]; ++j) m *= v[i];
    total += m;
  }
  return total;
}

Polynomial Polynomial::substitute_linear(const Eigen::MatrixXd& A) const {
  const int dw = static_cast<int>(A.cols());
  std::vector<Polynomial> rows;
  for (int i = 0; i < d_; ++i) rows.push_back(linear_form(A.row(i).transpose()));
  // Powers of each substituted variable, built on demand.
  std::vector<std::vector<Polynomial>> powers(d_);
  auto power_of = [&](int i, int e) -> const Polynomial& {
    auto& pw = powers[i];
    if (pw.empty()) pw.push_back(constant(dw, 1.0));
    while (static_cast<int>(pw.size()) <= e) pw.push_back(pw.back() * rows[i]);
    return pw[e];
  };
  Polynomial out(dw);
  for (const auto& [e, c] : terms_) {
    Polynomial term = constant(dw, c);
    for (int i = 0; i < d_; ++i)
      if (e[i] > 0) term = term * power_of(i, e[i]);
    out += term;
  }
  return out;
}

void Polynomial::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) it = it->second == 0.0 ? terms_.erase(it) : std::next(it);
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (o.d_ != d_) throw Error(ErrorCode::PreconditionFailed, "polynomial dimension mismatch");
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (o.d_ != d_) throw Error(ErrorCode::PreconditionFailed, "polynomial dimension mismatch");
  for (const auto& [e, c] : o.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double c) {
  for (auto& [e, v] : terms_) v *= c;
  prune();
  return *this;
}

std::string Polynomial::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << c;
    for (int i = 0; i < d_; ++i)
      if (e[i] > 0) os << "*v" << i << (e[i] > 1 ? "^" + std::to_string(e[i]) : "");
  }
  return first ? "0" : os.str();
}

Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
Polynomial operator*(Polynomial a, double c) { return a *= c; }
Polynomial operator*(double c, Polynomial a) { return a *= c; }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.d_ != b.d_) throw Error(ErrorCode::PreconditionFailed, "polynomial dimension mismatch");
  Polynomial out(a.d_);
  Exponent e(a.d_);
  for (const auto& [ea, ca] : a.terms_)
    for (const auto& [eb, cb] : b.terms_) {
      for (int i = 0; i < a.d_; ++i) e[i] = ea[i] + eb[i];
      out.add_term(e, ca * cb);
    }
  return out;
}

Polynomial pow(const Polynomial& p, int e) {
  Polynomial out = Polynomial::constant(p.dim(), 1.0);
  for (int i = 0; i < e; ++i) out = out * p;
  return out;
}

}  // namespace psos
