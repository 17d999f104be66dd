#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "helpers.hpp"
#include "psos/error.hpp"
#include "psos/sos.hpp"

using namespace psos;

namespace {

Exponent add(const Exponent& a, const Exponent& b) {
  Exponent e(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) e[i] = a[i] + b[i];
  return e;
}

// Dense symmetric matrix of one block from the stacked svec, weight removed.
Eigen::MatrixXd unpack(const CompiledProblem& p, const Eigen::VectorXd& s, int block) {
  const auto& blk = p.blocks[block];
  const int n = blk.size();
  Eigen::MatrixXd M(n, n);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a <= b; ++a) {
      const double v = s[blk.offset + b * (b + 1) / 2 + a] / (blk.weight * (a == b ? 1.0 : std::sqrt(2.0)));
      M(a, b) = M(b, a) = v;
    }
  return M;
}

Polynomial random_poly(Rng& rng, int d, int degree) {
  Polynomial p(d);
  MonomialBasis b(d, degree);
  for (int i = 0; i < b.size(); ++i) p.add_term(b[i], rng.normal());
  return p;
}

SolveResult solve_sphere(int d) {
  CompiledProblem p = compile(sphere_system(d), d, 4);
  return solve_feasible(p);
}

}  // namespace

TEST_CASE("monomial basis is graded lexicographic with the constant first") {
  MonomialBasis b(3, 3);
  CHECK(b.size() == 20);
  CHECK(total_degree(b[0]) == 0);
  for (int i = 1; i < b.size(); ++i) {
    CHECK(b.degree(i - 1) <= b.degree(i));
    if (b.degree(i - 1) == b.degree(i)) CHECK(b[i - 1] > b[i]);
    CHECK(b.index(b[i]) == i);
  }
  CHECK(b[1] == Exponent{1, 0, 0});
  CHECK(b[3] == Exponent{0, 0, 1});
  CHECK(b.degree_start(2) == 4);
  for (int i = 0; i < b.size(); ++i)
    for (int j = 0; j < 3; ++j) {
      Exponent e = b[i];
      ++e[j];
      CHECK(b.successor(i, j) == (total_degree(e) <= 3 ? b.index(e) : -1));
    }
  CHECK(b.index(Exponent{4, 0, 0}) == -1);
}

TEST_CASE("sphere at degree 2 compiles to a 3x3 moment matrix and two equalities") {
  CompileOptions opt;
  opt.exploit_parity = false;
  CompiledProblem p = compile(sphere_system(2), 2, 2, opt);
  CHECK(p.main_matrix_dim() == 3);
  CHECK(p.num_equalities() == 2);
  int main_blocks = 0;
  for (const auto& blk : p.blocks)
    if (blk.kind == CompiledProblem::BlockKind::Main) {
      ++main_blocks;
      CHECK(blk.size() == 3);
    }
  CHECK(main_blocks == 1);
}

TEST_CASE("empty system has only PSD blocks and the normalization") {
  ConstraintSystem sys;
  sys.d = 3;
  sys.bound_B = 4.0;
  CompiledProblem p = compile(sys, 3, 4);
  CHECK(p.num_equalities() == 1);
  CHECK(p.A.rows() == 0);
  for (const auto& blk : p.blocks) CHECK(blk.kind != CompiledProblem::BlockKind::Localizing);
}

TEST_CASE("compiled blocks match a symbolic moment oracle") {
  for (bool parity : {false, true}) {
    ConstraintSystem sys;
    sys.d = 2;
    sys.bound_B = 3.0;
    sys.add_inequality(Polynomial::constant(2, 1.0), "one");
    Polynomial q(2);
    q.add_term({2, 0}, 1.5);
    q.add_term({0, 0}, -0.25);
    q.add_term({1, 1}, 0.5);
    sys.add_inequality(q, "quad");
    CompileOptions opt;
    opt.exploit_parity = parity;
    CompiledProblem p = compile(sys, 2, 4, opt);
    Rng rng(11);
    std::vector<double> y(p.moments.size());
    for (int i = 0; i < p.moments.size(); ++i) y[i] = p.var_index[i] >= 0 ? rng.normal() : p.fixed_value[i];
    const Eigen::VectorXd s = p.L * p.restrict(y) + p.c;
    for (int j = 0; j < static_cast<int>(p.blocks.size()); ++j) {
      const auto& blk = p.blocks[j];
      const Eigen::MatrixXd M = unpack(p, s, j);
      for (int a = 0; a < blk.size(); ++a)
        for (int b = 0; b < blk.size(); ++b) {
          const Exponent ab = add(p.basis[blk.rows[a]], p.basis[blk.rows[b]]);
          double expect = 0.0;
          for (const auto& [e, c] : blk.q.terms()) expect += c * y[p.moments.index(add(ab, e))];
          CHECK(M(a, b) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    // The constant-one localizing block is the moment matrix restricted to its rows.
    const std::vector<int> ones = p.blocks_of_inequality(0);
    REQUIRE(!ones.empty());
    for (int j : ones) {
      const auto& blk = p.blocks[j];
      const Eigen::MatrixXd M = unpack(p, s, j);
      for (int a = 0; a < blk.size(); ++a)
        for (int b = 0; b < blk.size(); ++b)
          CHECK(M(a, b) == doctest::Approx(y[p.moments.index(add(p.basis[blk.rows[a]], p.basis[blk.rows[b]]))]).epsilon(1e-12));
    }
    // The quadratic localizing block covers degree ≤ 1.
    for (int j : p.blocks_of_inequality(1))
      for (int r : p.blocks[j].rows) CHECK(p.basis.degree(r) <= 1);
  }
}

TEST_CASE("compile rejects constraints above the relaxation degree") {
  ConstraintSystem sys;
  sys.d = 2;
  sys.bound_B = 2.0;
  Polynomial q(2);
  q.add_term({3, 0}, 1.0);
  sys.add_inequality(q);
  CHECK_THROWS_AS(compile(sys, 2, 2), Error);
  try {
    compile(sys, 2, 2);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegreeOverflow);
  }
  CHECK_THROWS_AS(compile(sys, 2, 3), Error);
}

TEST_CASE("the compiled map is affine") {
  CompiledProblem p = compile(sphere_system(3), 3, 4);
  Rng rng(5);
  Eigen::VectorXd x1 = Eigen::VectorXd::NullaryExpr(p.num_vars, [&] { return rng.normal(); });
  Eigen::VectorXd x2 = Eigen::VectorXd::NullaryExpr(p.num_vars, [&] { return rng.normal(); });
  const double a = 0.3, b = -1.7;
  const Eigen::VectorXd lhs = p.L * (a * x1 + b * x2) + p.c;
  const Eigen::VectorXd rhs = a * (p.L * x1 + p.c) + b * (p.L * x2 + p.c) + (1.0 - a - b) * p.c;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sphere relaxation is feasible with a valid pseudo-expectation") {
  for (int d = 1; d <= 4; ++d) {
    SolveResult r = solve_sphere(d);
    REQUIRE(r.status == SolveStatus::Feasible);
    const PseudoExpectation& pe = *r.pe;
    CHECK(std::abs(apply(pe, Polynomial::constant(d, 1.0)) - 1.0) < 1e-8);
    CHECK(std::abs(apply(pe, Polynomial::squared_norm(d)) - 1.0) < 1e-6);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pe.moment_matrix);
    CHECK(es.eigenvalues().minCoeff() >= -1e-6);
    CHECK(residuals_ok(pe.residuals, 1e-6));
    // Entries with the same product monomial agree.
    for (int a = 0; a < pe.basis.size(); ++a)
      for (int b = 0; b < pe.basis.size(); ++b)
        CHECK(std::abs(pe.moment_matrix(a, b) - pe.moment(add(pe.basis[a], pe.basis[b]))) <= 1e-8);
  }
}

TEST_CASE("pseudo Cauchy-Schwarz and Jensen on random polynomials") {
  for (int d = 2; d <= 4; ++d) {
    SolveResult r = solve_sphere(d);
    REQUIRE(r.status == SolveStatus::Feasible);
    const PseudoExpectation& pe = *r.pe;
    Rng rng(100 + d);
    for (int trial = 0; trial < 100; ++trial) {
      const Polynomial p = random_poly(rng, d, 2), q = random_poly(rng, d, 2);
      const double pq = apply(pe, p * q), pp = apply(pe, p * p), qq = apply(pe, q * q);
      CHECK(pq * pq <= pp * qq + 1e-6 * (pp + qq + 1.0));
      const double scale = p.coefficient_norm() * p.coefficient_norm();
      CHECK(pp >= -1e-6 * scale);
      const double ep = apply(pe, p);
      CHECK(ep * ep <= pp + 1e-6 * scale);
      const Eigen::VectorXd u = rng.normal_vector(d);
      CHECK(apply(pe, pow(Polynomial::linear_form(u), 2)) <= apply(pe, Polynomial::squared_norm(d)) * u.squaredNorm() + 1e-6);
    }
  }
}

TEST_CASE("contradictory system is infeasible with a certificate") {
  ConstraintSystem sys = sphere_system(3);
  sys.add_inequality(Polynomial::constant(3, 0.25) - Polynomial::squared_norm(3), "small");
  CompiledProblem p = compile(sys, 3, 4);
  SolveResult r = solve_feasible(p);
  CHECK(r.status == SolveStatus::Infeasible);
  REQUIRE(r.certificate);
  CHECK(r.certificate->margin > kDefaultTol);
  CHECK(!r.pe);
}

TEST_CASE("a true solution passes every compiled check as a point mass") {
  Rng rng(9);
  for (int d = 2; d <= 4; ++d) {
    CompiledProblem p = compile(sphere_system(d), d, 4);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::VectorXd v0 = rng.unit_vector(d);
      const PseudoExpectation pm = point_mass(d, 4, v0);
      const auto res = evaluate_residuals(p, pm.moment_vector);
      CHECK(residuals_ok(res, 1e-12));
      CHECK(apply(pm, Polynomial::squared_norm(d)) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("apply is linear and guards its degree") {
  SolveResult r = solve_sphere(3);
  REQUIRE(r.pe);
  const PseudoExpectation& pe = *r.pe;
  CHECK(apply(pe, Polynomial::constant(3, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Polynomial p = random_poly(rng, 3, 4), q = random_poly(rng, 3, 4);
    const double a = rng.normal(), b = rng.normal();
    const double lhs = apply(pe, p * a + q * b);
    CHECK(std::abs(lhs - (a * apply(pe, p) + b * apply(pe, q))) <= 1e-12 * (1.0 + std::abs(lhs)));
  }
  Polynomial high(3);
  high.add_term({5, 0, 0}, 1.0);
  CHECK_THROWS_AS(apply(pe, high), Error);
}

TEST_CASE("even form extraction") {
  const Eigen::VectorXd v0 = (Eigen::VectorXd(3) << 0.6, -0.8, 0.0).finished();
  const PseudoExpectation pm = point_mass(3, 4, v0);
  for (int s = 1; s <= 2; ++s) {
    const SymmetricTensor t = extract_even_form(pm, s);
    CHECK(t.order() == 2 * s);
    t.for_each([&](std::size_t rank, const std::vector<int>& idx) {
      double expect = 1.0;
      for (int i : idx) expect *= v0[i];
      CHECK(t.values()[rank] == doctest::Approx(expect).epsilon(1e-14));
    });
  }
  CHECK_THROWS_AS(extract_even_form(pm, 3), Error);

  SolveResult r = solve_sphere(3);
  REQUIRE(r.pe);
  const SymmetricTensor m2 = extract_even_form(*r.pe, 1);
  Eigen::Matrix3d M;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) M(i, j) = m2.at({std::min(i, j), std::max(i, j)});
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(M).eigenvalues().minCoeff() >= -1e-6);
  const SymmetricTensor m4 = extract_even_form(*r.pe, 2);
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd u = rng.normal_vector(3);
    CHECK(std::abs(m4.evaluate(u) - apply(*r.pe, pow(Polynomial::linear_form(u), 4))) <= 1e-9);
    CHECK(std::abs(m2.evaluate(u) - apply(*r.pe, pow(Polynomial::linear_form(u), 2))) <= 1e-9);
  }
}

TEST_CASE("pullback of a point mass is the point mass at the image") {
  Rng rng(21);
  const Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(3, 2, [&] { return rng.normal(); });
  const Eigen::VectorXd w0 = rng.normal_vector(2);
  const PseudoExpectation pv = pullback(point_mass(2, 6, w0), A);
  const PseudoExpectation direct = point_mass(3, 6, A * w0);
  REQUIRE(pv.moment_vector.size() == direct.moment_vector.size());
  for (std::size_t i = 0; i < pv.moment_vector.size(); ++i)
    CHECK(std::abs(pv.moment_vector[i] - direct.moment_vector[i]) <= 1e-12 * (1.0 + std::abs(direct.moment_vector[i])));
}

TEST_CASE("pullback commutes with substitution") {
  SolveResult r = solve_sphere(2);
  REQUIRE(r.pe);
  Rng rng(8);
  const Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(3, 2, [&] { return rng.normal(); });
  const PseudoExpectation pv = pullback(*r.pe, A);
  for (int trial = 0; trial < 10; ++trial) {
    const Polynomial p = random_poly(rng, 3, 4);
    CHECK(apply(pv, p) == doctest::Approx(apply(*r.pe, p.substitute_linear(A))).epsilon(1e-10));
  }
}

TEST_CASE("solves are deterministic and warm starts converge quickly") {
  CompiledProblem p1 = compile(sphere_system(3), 3, 4), p2 = compile(sphere_system(3), 3, 4);
  SolveResult a = solve_feasible(p1), b = solve_feasible(p2);
  REQUIRE(a.pe);
  REQUIRE(b.pe);
  CHECK(a.pe->moment_vector == b.pe->moment_vector);
  CHECK(a.iterations == b.iterations);
  SolveOptions opt;
  opt.warm = &a.state;
  SolveResult c = solve_feasible(p1, kDefaultTol, kDefaultMaxIters, opt);
  CHECK(c.status == SolveStatus::Feasible);
  CHECK(c.iterations <= a.iterations);
}

TEST_CASE("iteration limit yields undecided rather than an error") {
  ConstraintSystem sys = sphere_system(3);
  sys.add_inequality(Polynomial::constant(3, 0.25) - Polynomial::squared_norm(3), "small");
  CompiledProblem p = compile(sys, 3, 4);
  SolveResult r = solve_feasible(p, kDefaultTol, 5);
  CHECK(r.status == SolveStatus::Undecided);
  CHECK(!r.certificate);
}

TEST_CASE("scalar constants can be changed in place") {
  // {‖v‖² = 1, T − v₁² ≥ 0} is feasible exactly when T ≥ 0.
  ConstraintSystem sys = sphere_system(2);
  Polynomial q = Polynomial::constant(2, 1.0);
  q.add_term({2, 0}, -1.0);
  sys.add_inequality(q, "cap");
  CompiledProblem p = compile(sys, 2, 2);
  CHECK(solve_feasible(p).status == SolveStatus::Feasible);
  p.set_scalar_constant(0, -0.5);
  CHECK(solve_feasible(p).status == SolveStatus::Infeasible);
  sys.inequalities[0].add_term({0, 0}, -1.5);
  CompiledProblem fresh = compile(sys, 2, 2);
  CHECK(solve_feasible(fresh).status == SolveStatus::Infeasible);
  p.set_scalar_constant(0, 0.2);
  SolveResult r = solve_feasible(p);
  REQUIRE(r.status == SolveStatus::Feasible);
  CHECK(apply(*r.pe, pow(Polynomial::variable(2, 0), 2)) <= 0.2 + 1e-6);
  CHECK_THROWS_AS(compile(sphere_system(2), 2, 4).set_scalar_constant(0, 1.0), Error);
}

TEST_CASE("pseudo-expectation container round trip") {
  const PseudoExpectation pm = point_mass(2, 4, Eigen::Vector2d(0.5, -2.0));
  const std::string path = "test_sos_pe.pten";
  write_pseudo_expectation(path, pm);
  const Eigen::MatrixXd back = read_matrix_container(path, "PTEN");
  REQUIRE(back.rows() == static_cast<Eigen::Index>(pm.moment_vector.size()));
  for (Eigen::Index i = 0; i < back.rows(); ++i) CHECK(back(i, 0) == pm.moment_vector[i]);
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}
