#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "psos/error.hpp"
#include "psos/mixture.hpp"

using namespace psos;
using namespace testing_helpers;

namespace {

MixtureSpec two_point(const Eigen::VectorXd& u, double var) {
  MixtureSpec s;
  s.means = {u, -u};
  s.covariance = var * Eigen::MatrixXd::Identity(u.size(), u.size());
  s.weights = {0.5, 0.5};
  return s;
}

}  // namespace

TEST_CASE("sample: single component gives label 1") {
  const SampleSet s = sample(isotropic_gaussian(2), 3, 7);
  REQUIRE(s.n() == 3);
  REQUIRE(s.labels);
  for (int l : *s.labels) CHECK(l == 1);
}

TEST_CASE("sample: zero-weight component is never drawn") {
  MixtureSpec s = isotropic_gaussian(2);
  s.means.push_back(Eigen::VectorXd::Constant(2, 5.0));
  s.weights = {1.0, 0.0};
  const SampleSet out = sample(s, 500, 3);
  for (int l : *out.labels) CHECK(l == 1);
}

TEST_CASE("sample: label frequencies follow weights") {
  MixtureSpec s = isotropic_gaussian(2);
  s.means.push_back(Eigen::VectorXd::Constant(2, 5.0));
  s.weights = {0.5, 0.5};
  const SampleSet out = sample(s, 100000, 11);
  double ones = 0;
  for (int l : *out.labels) ones += l == 1;
  CHECK(std::abs(ones / 1e5 - 0.5) <= 0.01);
}

TEST_CASE("sample: identical inputs replay bit-exactly") {
  Rng rng(5);
  const MixtureSpec s = random_spec(rng, 3, 4);
  const SampleSet a = sample(s, 200, 99), b = sample(s, 200, 99);
  CHECK(a.points == b.points);
  CHECK(*a.labels == *b.labels);
  const SampleSet c = sample(s, 200, 100);
  CHECK(!(a.points == c.points));
}

TEST_CASE("sample: non-PD covariance is rejected") {
  MixtureSpec s = isotropic_gaussian(2);
  s.covariance(1, 1) = 0.0;
  try {
    sample(s, 5, 1);
    FAIL("expected InvalidCovariance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidCovariance);
  }
}

TEST_CASE("directional_moment_exact: worked examples") {
  Eigen::VectorXd e1 = Eigen::VectorXd::Unit(2, 0);
  CHECK(directional_moment_exact(isotropic_gaussian(2), e1, 4) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(directional_moment_exact(two_point(e1, 0.0), e1, 4) == doctest::Approx(1.0).epsilon(1e-14));
  // 1 + 6·0.25 + 3·0.25²
  const double exact = directional_moment_exact(two_point(e1, 0.25), e1, 4);
  CHECK(exact == doctest::Approx(2.6875).epsilon(1e-14));
  const SampleSet s = sample(two_point(e1, 0.25), 1000000, 2);
  CHECK(std::abs(mc_moment(s.points, e1, 4) / exact - 1.0) <= 0.02);
}

TEST_CASE("directional_moment_exact: errors") {
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(directional_moment_exact(isotropic_gaussian(2), v, 3), Error);
  try {
    directional_moment_exact(isotropic_gaussian(2), v, 66);
    FAIL("expected OrderTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OrderTooLarge);
  }
  try {
    directional_moment_exact(isotropic_gaussian(2), v, 5);
    FAIL("expected OddOrder");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OddOrder);
  }
}

TEST_CASE("directional_moment_exact: second moment identity") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const MixtureSpec s = random_spec(rng, 1 + trial % 4, 3);
    const Eigen::VectorXd v = rng.normal_vector(3);
    const Eigen::VectorXd m = population_mean(s);
    const double expect = v.dot(population_covariance(s) * v) + std::pow(m.dot(v), 2);
    CHECK(directional_moment_exact(s, v, 2) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("directional_moment_exact: homogeneity and Jensen ordering") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const MixtureSpec s = random_spec(rng, 3, 3);
    const Eigen::VectorXd v = rng.normal_vector(3);
    const double c = 0.3 + 2.0 * rng.uniform();
    for (int order = 2; order <= 10; order += 2) {
      CHECK(directional_moment_exact(s, c * v, order) == doctest::Approx(std::pow(c, order) * directional_moment_exact(s, v, order)).epsilon(1e-12));
    }
    for (int a = 1; a <= 4; ++a)
      for (int b = a; b <= 5; ++b) {
        const double lo = std::pow(directional_moment_exact(s, v, 2 * a), 1.0 / a);
        const double hi = std::pow(directional_moment_exact(s, v, 2 * b), 1.0 / b);
        CHECK(lo <= hi * (1 + 1e-9));
      }
  }
}

TEST_CASE("directional_moment_exact: pair-difference spec matches paired Monte Carlo") {
  Rng rng(23);
  const MixtureSpec s = random_spec(rng, 2, 3, 1.5);
  const MixtureSpec z = pair_difference_spec(s);
  const SampleSet a = sample(s, 1000000, 31), b = sample(s, 1000000, 32);
  const Eigen::MatrixXd diff = a.points - b.points;
  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::VectorXd v = rng.unit_vector(3);
    for (int order = 2; order <= 8; order += 2) {
      const double exact = directional_moment_exact(z, v, order);
      CHECK(std::abs(mc_moment(diff, v, order) / exact - 1.0) <= 0.05);
    }
  }
}

TEST_CASE("separation_report") {
  MixtureSpec s = isotropic_gaussian(3);
  s.means = {Eigen::VectorXd::Zero(3), 10.0 * Eigen::VectorXd::Unit(3, 0)};
  s.weights = {0.5, 0.5};
  CHECK(separation_report(s).min_pair == doctest::Approx(100.0));
  s.covariance(0, 0) = 4.0;
  const SeparationReport r = separation_report(s);
  CHECK(r.min_pair == doctest::Approx(25.0));
  CHECK(r.csep_min == doctest::Approx(25.0 / std::log(2.0)));

  Rng rng(24);
  const MixtureSpec q = random_spec(rng, 4, 3);
  const SeparationReport rq = separation_report(q);
  // Oracle: symmetric inverse square root from an eigendecomposition.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.covariance);
  const Eigen::MatrixXd isq = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  for (int i = 0; i < 4; ++i) {
    CHECK(rq.pairwise(i, i) == 0.0);
    for (int j = 0; j < 4; ++j) CHECK(rq.pairwise(i, j) == doctest::Approx((isq * (q.means[i] - q.means[j])).squaredNorm()).epsilon(1e-10));
  }
  CHECK(rq.min_pair <= rq.max_pair);
}

TEST_CASE("pair_difference_spec") {
  const MixtureSpec one = pair_difference_spec(isotropic_gaussian(2));
  CHECK(one.k() == 1);
  CHECK(one.means[0].norm() == 0.0);
  CHECK((one.covariance - 2.0 * Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);

  const Eigen::VectorXd u = Eigen::VectorXd::Unit(2, 1);
  const MixtureSpec two = pair_difference_spec(two_point(u, 1.0));
  CHECK(two.k() == 4);
  int zeros = 0, plus = 0, minus = 0;
  for (int i = 0; i < 4; ++i) {
    CHECK(two.weights[i] == doctest::Approx(0.25));
    if (two.means[i].norm() == 0.0) ++zeros;
    if ((two.means[i] - 2.0 * u).norm() == 0.0) ++plus;
    if ((two.means[i] + 2.0 * u).norm() == 0.0) ++minus;
  }
  CHECK(zeros == 2);
  CHECK(plus == 1);
  CHECK(minus == 1);

  Rng rng(25);
  for (int trial = 0; trial < 5; ++trial) CHECK(population_mean(pair_difference_spec(random_spec(rng, 3, 4))).norm() <= 1e-12);
}

TEST_CASE("double factorial table") {
  CHECK(double_factorial(-1) == 1.0);
  CHECK(double_factorial(0) == 1.0);
  CHECK(double_factorial(7) == 105.0);
  CHECK(double_factorial(8) == 384.0);
  CHECK_THROWS_AS(double_factorial(65), Error);
}
