#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "psos/colinear.hpp"
#include "psos/error.hpp"

using namespace psos;

namespace {

Eigen::MatrixXd empirical_cov(const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd c = X.rowwise() - X.colwise().mean();
  return c.transpose() * c / static_cast<double>(X.rows());
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& A) { return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A).operatorSqrt(); }

SampleSet gaussian_points(const Eigen::MatrixXd& cov, int n, std::uint64_t seed) {
  MixtureSpec s;
  s.means = {Eigen::VectorXd::Zero(cov.rows())};
  s.covariance = cov;
  s.weights = {1.0};
  return sample(s, n, seed);
}

// Isotropic colinear closed form: E⟨y,v⟩^t = Σ p_i Σ_j C(t,j) ⟨μ_i,v⟩^{t−j} (j−1)!! s^{j/2}, s = 1 − (1−σ²)⟨u,v⟩².
double isotropic_moment(const MixtureSpec& spec, const Eigen::VectorXd& u, double sigma_sq, const Eigen::VectorXd& v, int t) {
  const double var = v.squaredNorm() - (1.0 - sigma_sq) * std::pow(u.dot(v), 2);
  double total = 0.0;
  for (int i = 0; i < spec.k(); ++i) {
    const double m = spec.means[i].dot(v);
    double c = 1.0, df = 1.0, sum = 0.0;  // c = C(t, j), df = (j − 1)!!
    for (int j = 0; j <= t; ++j) {
      if (j % 2 == 0) sum += c * std::pow(m, t - j) * df * std::pow(var, j / 2);
      if (j % 2 == 1) df *= j;
      c = c * (t - j) / (j + 1);
    }
    total += spec.weights[i] * sum;
  }
  return total;
}

double max_line_deviation(const std::vector<Eigen::VectorXd>& pts) {
  if (pts.size() < 3) return 0.0;
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(pts[0].size());
  for (const auto& p : pts)
    if ((p - pts[0]).norm() > dir.norm()) dir = p - pts[0];
  dir.normalize();
  double dev = 0.0;
  for (const auto& p : pts) {
    const Eigen::VectorXd r = p - pts[0];
    dev = std::max(dev, (r - r.dot(dir) * dir).norm());
  }
  return dev;
}

// Best matching by dynamic programming over subsets of clusters.
double subset_dp_rate(const std::vector<int>& labels, const std::vector<int>& assignment) {
  const int K = std::max(*std::max_element(labels.begin(), labels.end()), *std::max_element(assignment.begin(), assignment.end()));
  std::vector<std::vector<double>> C(K, std::vector<double>(K, 0.0));
  for (std::size_t i = 0; i < labels.size(); ++i) C[labels[i] - 1][assignment[i] - 1] += 1.0;
  std::vector<double> best(1 << K, -1.0);
  best[0] = 0.0;
  for (int mask = 0; mask < (1 << K); ++mask) {
    if (best[mask] < 0.0) continue;
    const int row = __builtin_popcount(mask);
    if (row == K) continue;
    for (int j = 0; j < K; ++j)
      if (!(mask & (1 << j))) best[mask | (1 << j)] = std::max(best[mask | (1 << j)], best[mask] + C[row][j]);
  }
  return 1.0 - best[(1 << K) - 1] / static_cast<double>(labels.size());
}

std::vector<double> mixture_1d(Rng& rng, const std::vector<double>& means, int n, std::vector<int>& labels) {
  std::vector<double> v(n);
  labels.resize(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = 1 + static_cast<int>(rng.below(means.size()));
    v[i] = means[labels[i] - 1] + rng.normal();
  }
  return v;
}

DirectionConfig colinear_cfg(double pmin, int k, double C_sep, int d) {
  DirectionConfig c = DirectionConfig::desk(pmin, k, C_sep, d);
  c.t = 3 * c.s;
  return c;
}

}  // namespace

TEST_CASE("whiten: isotropic points give an orthogonal transform") {
  SampleSet pts = gaussian_points(Eigen::Matrix3d::Identity(), 500, 1);
  const Eigen::MatrixXd W = sym_sqrt(empirical_cov(pts.points)).inverse();
  pts.points = (pts.points.rowwise() - pts.points.colwise().mean()) * W.transpose();
  const auto [wt, y] = whiten(pts);
  CHECK((wt.W_hat * wt.W_hat.transpose() - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-8);
}

TEST_CASE("whiten: diag(4,1) maps to identity covariance") {
  const SampleSet pts = gaussian_points(Eigen::Vector2d(4.0, 1.0).asDiagonal(), 2000, 2);
  const auto [wt, y] = whiten(pts);
  CHECK((wt.W_hat * empirical_cov(pts.points) * wt.W_hat.transpose() - Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-8);
  CHECK((empirical_cov(y.points) - Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-8);
  CHECK(y.points.colwise().mean().norm() <= 1e-10);
  REQUIRE(y.transform_log.size() == pts.transform_log.size() + 1);
  const AffineTransform& t = y.transform_log.back();
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd x = pts.points.row(i).transpose();
    CHECK((t.matrix * x + t.offset - y.points.row(i).transpose()).norm() <= 1e-12);
    CHECK((wt.apply(x) - y.points.row(i).transpose()).norm() <= 1e-12);
  }
}

TEST_CASE("whiten: the transform times cov^{1/2} has orthonormal rows") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + static_cast<int>(rng.below(5));
    const SampleSet pts = gaussian_points(testing_helpers::random_spd(rng, d, 0.1), 400, 100 + trial);
    const auto [wt, y] = whiten(pts);
    const Eigen::MatrixXd Q = wt.W_hat * sym_sqrt(empirical_cov(pts.points));
    CHECK((Q * Q.transpose() - Eigen::MatrixXd::Identity(d, d)).norm() <= 1e-8);
    CHECK(Eigen::JacobiSVD<Eigen::MatrixXd>(wt.W_hat).singularValues().minCoeff() > 0.0);
  }
}

TEST_CASE("whiten: rank-deficient covariance is rejected") {
  SampleSet pts = gaussian_points(Eigen::Matrix3d::Identity(), 200, 4);
  pts.points.col(2) = pts.points.col(0) + pts.points.col(1);
  try {
    whiten(pts);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }
}

TEST_CASE("sigma identity: identity covariance with means on e1") {
  MixtureSpec s;
  s.covariance = Eigen::MatrixXd::Identity(3, 3);
  s.means = {Eigen::Vector3d(-2.0, 0.0, 0.0), Eigen::Vector3d(1.0, 0.0, 0.0), Eigen::Vector3d(3.0, 0.0, 0.0)};
  s.weights = {0.2, 0.5, 0.3};
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < 3; ++i) mean += s.weights[i] * s.means[i][0];
  for (int i = 0; i < 3; ++i) var += s.weights[i] * std::pow(s.means[i][0] - mean, 2);
  const SigmaIdentity r = sigma_sq_identity_check(s, Eigen::Vector3d::UnitX());
  CHECK(r.lhs == doctest::Approx(1.0 / (1.0 + var)).epsilon(1e-12));
  CHECK(r.rhs == doctest::Approx(1.0 / (1.0 + var)).epsilon(1e-12));
}

TEST_CASE("sigma identity: single component gives one") {
  Rng rng(5);
  MixtureSpec s;
  s.covariance = testing_helpers::random_spd(rng, 4);
  s.means = {rng.normal_vector(4)};
  s.weights = {1.0};
  const SigmaIdentity r = sigma_sq_identity_check(s, rng.unit_vector(4));
  CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.rhs == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sigma identity: both sides agree on random colinear specs") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd u0;
    const MixtureSpec s = testing_helpers::random_colinear(rng, 2 + static_cast<int>(rng.below(4)), 2 + static_cast<int>(rng.below(5)), u0);
    const SigmaIdentity r = sigma_sq_identity_check(s, u0);
    CHECK(std::abs(r.lhs - r.rhs) <= 1e-8 * r.rhs);
    CHECK(r.lhs > 0.0);
    CHECK(r.lhs <= 1.0 + 1e-12);
  }
}

TEST_CASE("sigma identity: non-colinear means are rejected") {
  MixtureSpec s;
  s.covariance = Eigen::MatrixXd::Identity(2, 2);
  s.means = {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(1.0, 1e-3)};
  s.weights = {0.3, 0.3, 0.4};
  try {
    sigma_sq_identity_check(s, Eigen::Vector2d::UnitX());
    FAIL("expected NotColinear");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotColinear);
  }
}

TEST_CASE("isotropic position of a colinear spec") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd u0;
    const int d = 2 + static_cast<int>(rng.below(5));
    const MixtureSpec s = testing_helpers::random_colinear(rng, 2 + static_cast<int>(rng.below(4)), d, u0);
    const auto [iso, W] = isotropic_position(s);
    const Eigen::VectorXd u = (W * u0).normalized();
    double proj = 0.0;
    for (int i = 0; i < iso.k(); ++i) proj += iso.weights[i] * std::pow(iso.means[i].dot(u), 2);
    const double sigma_sq = 1.0 - proj;
    CHECK(sigma_sq > 0.0);
    CHECK(sigma_sq <= 1.0);
    const Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(d, d) - (1.0 - sigma_sq) * u * u.transpose();
    CHECK((iso.covariance - expected).norm() <= 1e-10);
    CHECK(sigma_sq_identity_check(s, u0).lhs == doctest::Approx(sigma_sq).epsilon(1e-8));
    CHECK(max_line_deviation(iso.means) <= 1e-8);
    for (int q = 0; q < 20; ++q) {
      const Eigen::VectorXd v = rng.normal_vector(d);
      const int order = 2 * (1 + static_cast<int>(rng.below(3)));
      const double exact = directional_moment_exact(iso, v, order);
      CHECK(std::abs(isotropic_moment(iso, u, sigma_sq, v, order) - exact) <= 1e-9 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST_CASE("isotropic mean separation along the direction") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(6));
    const int d = 2 + static_cast<int>(rng.below(4));
    const double spacing = rng.uniform(3.0, 20.0);
    const ColinearInstance inst = make_colinear_instance(500 + trial, k, d, rng.uniform(1.0, 16.0), spacing);
    const SeparationReport rep = separation_report(inst.spec);
    const double lnp = std::log(1.0 / inst.spec.pmin());
    const double C_sep = rep.min_pair / lnp;
    const auto [iso, W] = isotropic_position(inst.spec);
    const Eigen::VectorXd u = (W * inst.u0).normalized();
    const double sigma_sq = sigma_sq_identity_check(inst.spec, inst.u0).lhs;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        CHECK(std::pow((iso.means[i] - iso.means[j]).dot(u), 2) >= C_sep * sigma_sq * lnp * (1.0 - 1e-9));
    const int s = std::max(1, static_cast<int>(std::ceil(lnp - 1e-12)));
    double m = 0.0;
    for (int i = 0; i < k; ++i) m += iso.weights[i] * std::pow(iso.means[i].dot(u), 2 * s);
    CHECK(std::pow(m, 1.0 / s) >= C_sep / 100.0 * k * k * sigma_sq * lnp);
  }
}

TEST_CASE("whitening preserves Mahalanobis separation") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd u0;
    const MixtureSpec s = testing_helpers::random_colinear(rng, 3, 4, u0);
    const auto [wt, y] = whiten(sample(s, 300, 200 + trial));
    const MixtureSpec t = transform_spec(s, wt.W_hat, -wt.W_hat * wt.mean_hat);
    const Eigen::MatrixXd a = separation_report(s).pairwise, b = separation_report(t).pairwise;
    CHECK((a - b).norm() <= 1e-8 * std::max(1.0, a.norm()));
    CHECK(max_line_deviation(t.means) <= 1e-8 * std::max(1.0, t.means[0].norm()));
  }
}

TEST_CASE("colinear instance generator") {
  const ColinearInstance a = make_colinear_instance(11, 3, 6, 16.0, 14.0);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a.spec.covariance).eigenvalues();
  CHECK(ev.maxCoeff() / ev.minCoeff() == doctest::Approx(16.0).epsilon(1e-9));
  const SeparationReport rep = separation_report(a.spec);
  CHECK(std::sqrt(rep.pairwise(0, 1)) == doctest::Approx(14.0).epsilon(1e-9));
  CHECK(std::sqrt(rep.pairwise(1, 2)) == doctest::Approx(14.0).epsilon(1e-9));
  CHECK(std::sqrt(rep.pairwise(0, 2)) == doctest::Approx(28.0).epsilon(1e-9));
  CHECK(max_line_deviation(a.spec.means) <= 1e-9);
  CHECK(a.u0.norm() == doctest::Approx(1.0));
  const ColinearInstance b = make_colinear_instance(11, 3, 6, 16.0, 14.0);
  CHECK(a.spec.covariance == b.spec.covariance);
  CHECK(a.spec.means[2] == b.spec.means[2]);
  CHECK_THROWS_AS(make_colinear_instance(1, 2, 3, 0.5, 1.0), Error);
}

TEST_CASE("cluster_1d examples") {
  const Clusters1D a = cluster_1d({0.0, 0.1, 5.0, 5.1}, 1.0);
  CHECK(a.k_found == 2);
  CHECK(a.assignment == std::vector<int>{1, 1, 2, 2});
  REQUIRE(a.cuts.size() == 1);
  CHECK(a.cuts[0] == doctest::Approx(2.55));
  const Clusters1D b = cluster_1d({0.3, 0.1, 0.5, 0.2}, 1.0);
  CHECK(b.k_found == 1);
  CHECK(b.assignment == std::vector<int>{1, 1, 1, 1});
  CHECK(cluster_1d({5.0, 0.0, 10.0}, 2.0).assignment == std::vector<int>{2, 1, 3});
  CHECK(cluster_1d({}, 1.0).k_found == 0);
  CHECK_THROWS_AS(cluster_1d({1.0}, 0.0), Error);
}

TEST_CASE("cluster_1d on a three-component line mixture") {
  Rng rng(12);
  std::vector<int> labels;
  const std::vector<double> v = mixture_1d(rng, {0.0, 8.0, 16.0}, 3000, labels);
  const Clusters1D c = kmeans_1d(v, 3);
  CHECK(c.k_found == 3);
  CHECK(best_permutation_error(labels, c.assignment).rate <= 0.01);
  const std::vector<double> w = mixture_1d(rng, {0.0, 16.0, 32.0}, 3000, labels);
  const Clusters1D g = cluster_1d(w, 4.0);
  CHECK(g.k_found == 3);
  CHECK(best_permutation_error(labels, g.assignment).rate <= 0.01);
}

TEST_CASE("cluster_1d is permutation and translation invariant and scale covariant") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(60));
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-10.0, 10.0);
    const double gap = rng.uniform(0.1, 3.0);
    const Clusters1D base = cluster_1d(v, gap);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<double> pv(n), tv(n), sv(n);
    const double shift = rng.uniform(-100.0, 100.0), scale = rng.uniform(0.1, 10.0);
    for (int i = 0; i < n; ++i) {
      pv[i] = v[perm[i]];
      tv[i] = v[i] + shift;
      sv[i] = v[i] * scale;
    }
    const Clusters1D p = cluster_1d(pv, gap);
    for (int i = 0; i < n; ++i) CHECK(p.assignment[i] == base.assignment[perm[i]]);
    CHECK(cluster_1d(sv, gap * scale).assignment == base.assignment);
    // Spacings near the gap can flip under rounding of the shift.
    const Clusters1D t = cluster_1d(tv, gap);
    bool near = false;
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 1; i < n; ++i) near = near || std::abs(sorted[i] - sorted[i - 1] - gap) < 1e-9;
    if (!near) CHECK(t.assignment == base.assignment);
    CHECK(base.k_found == static_cast<int>(base.cuts.size()) + 1);
  }
}

TEST_CASE("kmeans_1d splits close line components") {
  CHECK(kmeans_1d({0.0, 0.1, 5.0, 5.1}, 2).assignment == std::vector<int>{1, 1, 2, 2});
  CHECK(kmeans_1d({3.0, 3.0, 3.0}, 2).k_found == 1);
  CHECK_THROWS_AS(kmeans_1d({1.0}, 2), Error);
  CHECK_THROWS_AS(kmeans_1d({1.0}, 0), Error);
  Rng rng(14);
  std::vector<int> labels;
  const double sep = std::sqrt(25.0 * std::log(2.0));
  const std::vector<double> v = mixture_1d(rng, {0.0, sep}, 4000, labels);
  const Clusters1D c = kmeans_1d(v, 2);
  CHECK(c.k_found == 2);
  // Bayes error is Φ(−sep/2) ≈ 1.9%.
  CHECK(best_permutation_error(labels, c.assignment).rate <= std::erfc(sep / 2.0 / std::sqrt(2.0)) / 2.0 + 0.01);
}

TEST_CASE("densest window std picks up one component") {
  Rng rng(15);
  std::vector<int> labels;
  std::vector<double> v = mixture_1d(rng, {0.0, 50.0, 100.0}, 6000, labels);
  for (double& x : v) x *= 0.5;
  // The window is the central half of one N(0, 0.25) component; its scaled MAD is 1.4826·Φ⁻¹(5/8)·σ.
  CHECK(densest_window_std(v, 1.0 / 6.0) == doctest::Approx(1.4826 * 0.318639 * 0.5).epsilon(0.05));
  CHECK_THROWS_AS(densest_window_std({1.0}, 0.5), Error);
}

TEST_CASE("best permutation error examples") {
  const Misclassification a = best_permutation_error({1, 1, 2, 2}, {2, 2, 1, 1});
  CHECK(a.rate == 0.0);
  CHECK(a.permutation == std::vector<int>{2, 1});
  CHECK(best_permutation_error({1, 1, 2, 2}, {1, 1, 1, 1}).rate == doctest::Approx(0.5));
  const Misclassification pad = best_permutation_error({1, 1, 1, 1}, {1, 2, 3, 1});
  CHECK(pad.rate == doctest::Approx(0.5));
  CHECK(pad.permutation.size() == 3);
  CHECK_THROWS_AS(best_permutation_error({1, 2}, {1}), Error);
  CHECK_THROWS_AS(best_permutation_error({0, 1}, {1, 1}), Error);
}

TEST_CASE("best permutation error matches a subset oracle and is label invariant") {
  Rng rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(5)), kf = 1 + static_cast<int>(rng.below(5));
    const int n = 1 + static_cast<int>(rng.below(40));
    std::vector<int> labels(n), assignment(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = 1 + static_cast<int>(rng.below(k));
      assignment[i] = 1 + static_cast<int>(rng.below(kf));
    }
    const Misclassification m = best_permutation_error(labels, assignment);
    CHECK(m.rate == doctest::Approx(subset_dp_rate(labels, assignment)).epsilon(1e-12));
    CHECK(m.rate >= 0.0);
    CHECK(m.rate <= 1.0);
    std::vector<int> sorted = m.permutation;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> ids(sorted.size());
    std::iota(ids.begin(), ids.end(), 1);
    CHECK(sorted == ids);
    std::vector<int> relabel(kf + 1);
    std::iota(relabel.begin(), relabel.end(), 0);
    for (int i = kf; i > 1; --i) std::swap(relabel[i], relabel[1 + rng.below(i)]);
    std::vector<int> renamed(n);
    for (int i = 0; i < n; ++i) renamed[i] = relabel[assignment[i]];
    CHECK(best_permutation_error(labels, renamed).rate == doctest::Approx(m.rate).epsilon(1e-12));
    CHECK(best_permutation_error(labels, labels).rate == 0.0);
  }
}

TEST_CASE("best permutation error beyond eight clusters is greedy and flagged") {
  std::vector<int> labels, assignment;
  for (int c = 1; c <= 10; ++c)
    for (int r = 0; r < 5; ++r) {
      labels.push_back(c);
      assignment.push_back(11 - c);
    }
  const Misclassification m = best_permutation_error(labels, assignment);
  CHECK(m.greedy);
  CHECK(m.rate == 0.0);
  CHECK_FALSE(best_permutation_error({1, 2}, {2, 1}).greedy);
}

TEST_CASE("run_colinear on a single gaussian finds one cluster") {
  Rng rng(17);
  const SampleSet pts = gaussian_points(testing_helpers::random_spd(rng, 3), 2000, 17);
  const ClusteringResult r = run_colinear(pts, colinear_cfg(1.0, 1, 100.0, 3), GapChoice{}, 17);
  CHECK(r.k_found == 1);
  REQUIRE(r.misclassification);
  CHECK(*r.misclassification == 0.0);
  CHECK(r.direction_original.norm() == doctest::Approx(1.0));
  CHECK(r.gap_policy == "mad");
}

TEST_CASE("run_colinear is deterministic and invariant to an affine change of the input") {
  const double lnp = std::log(2.0);
  for (int seed = 0; seed < 10; ++seed) {
    const ColinearInstance inst = make_colinear_instance(300 + seed, 2, 3, 4.0, 12.0);
    const SampleSet pts = sample(inst.spec, 1500, 300 + seed);
    DirectionConfig cfg = DirectionConfig::desk(0.5, 2, 144.0 / lnp, 3);
    cfg.t = 2;
    const ClusteringResult a = run_colinear(pts, cfg, GapChoice{}, seed, inst.u0);
    CHECK(*a.misclassification <= 0.05);
    Rng rng(400 + seed);
    const Eigen::MatrixXd A = testing_helpers::random_spd(rng, 3) + rng.normal() * Eigen::MatrixXd::Identity(3, 3);
    REQUIRE(std::abs(A.determinant()) > 1e-3);
    const Eigen::VectorXd b = 5.0 * rng.normal_vector(3);
    SampleSet moved = pts;
    moved.points = (pts.points * A.transpose()).rowwise() + b.transpose();
    const ClusteringResult c = run_colinear(moved, cfg, GapChoice{}, seed);
    CHECK(best_permutation_error(a.assignment, c.assignment).rate <= 0.05);
    if (seed == 0) {
      const ClusteringResult again = run_colinear(pts, cfg, GapChoice{}, seed, inst.u0);
      CHECK(again.assignment == a.assignment);
      CHECK(again.direction.u_hat == a.direction.u_hat);
    }
  }
}

TEST_CASE("run_colinear: k = 2, d = 6 at separation 25 ln 2") {
  const double lnp = std::log(2.0);
  for (int seed = 0; seed < 3; ++seed) {
    const ColinearInstance inst = make_colinear_instance(600 + seed, 2, 6, 1.0, std::sqrt(25.0 * lnp));
    const SampleSet pts = sample(inst.spec, 4000, 600 + seed);
    GapChoice gap;
    gap.policy = GapPolicy::ExpectedK;
    gap.expected_k = 2;
    const ClusteringResult r = run_colinear(pts, colinear_cfg(0.5, 2, 25.0, 6), gap, seed, inst.u0);
    CHECK(r.gap_policy == "expected_k");
    CHECK(r.k_found == 2);
    CHECK(*r.misclassification <= 0.05);
  }
}

TEST_CASE("run_colinear: k = 3, d = 6, condition number 16") {
  const double lnp = std::log(3.0);
  const ColinearInstance inst = make_colinear_instance(700, 3, 6, 16.0, std::sqrt(25.0 * lnp));
  const SampleSet pts = sample(inst.spec, 16000, 700);
  GapChoice gap;
  gap.policy = GapPolicy::ExpectedK;
  gap.expected_k = 3;
  const ClusteringResult r = run_colinear(pts, colinear_cfg(1.0 / 3.0, 3, 25.0, 6), gap, 700, inst.u0);
  CHECK(r.k_found == 3);
  CHECK(*r.misclassification <= 0.05);
  CHECK(*r.direction.correlation >= 0.9);
}
