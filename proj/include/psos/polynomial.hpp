#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace psos {

using Exponent = std::vector<int>;

int total_degree(const Exponent& e);
// r! / Π e_i!
double multinomial(const Exponent& e);

// Sparse real polynomial in d variables.
class Polynomial {
 public:
  explicit Polynomial(int d = 0) : d_(d) {}

  static Polynomial constant(int d, double c);
  static Polynomial variable(int d, int i);
  static Polynomial linear_form(const Eigen::VectorXd& a);
  // vᵀ Q v
  static Polynomial quadratic_form(const Eigen::MatrixXd& Q);
  static Polynomial squared_norm(int d) { return quadratic_form(Eigen::MatrixXd::Identity(d, d)); }

  int dim() const { return d_; }
  const std::map<Exponent, double>& terms() const { return terms_; }
  double coefficient(const Exponent& e) const;
  void add_term(const Exponent& e, double c);

  int degree() const;  // −1 for the zero polynomial
  bool is_zero() const { return terms_.empty(); }
  // Invariant under v -> −v.
  bool is_even() const;
  // Euclidean norm of the coefficient vector.
  double coefficient_norm() const;

  double evaluate(const Eigen::VectorXd& v) const;
  // p(A w) as a polynomial in w; A is d × d'.
  Polynomial substitute_linear(const Eigen::MatrixXd& A) const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double c);

  std::string to_string() const;

 private:
  void prune();

  int d_;
  std::map<Exponent, double> terms_;
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
};

Polynomial operator+(Polynomial a, const Polynomial& b);
Polynomial operator-(Polynomial a, const Polynomial& b);
Polynomial operator*(Polynomial a, double c);
Polynomial operator*(double c, Polynomial a);
Polynomial operator*(const Polynomial& a, const Polynomial& b);
Polynomial pow(const Polynomial& p, int e);

}  // namespace psos
