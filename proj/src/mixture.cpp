#include "psos/mixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "psos/error.hpp"
#include "psos/rng.hpp"

namespace psos {

namespace {

struct Tables {
  std::array<double, kMaxMomentOrder + 2> dfact{};
  std::array<std::array<double, kMaxMomentOrder + 1>, kMaxMomentOrder + 1> binom{};

  Tables() {
    // dfact[m + 1] = m!!, with (−1)!! = 0!! = 1.
    dfact[0] = 1.0;
    dfact[1] = 1.0;
    for (int m = 1; m <= kMaxMomentOrder; ++m) dfact[m + 1] = m * (m >= 2 ? dfact[m - 1] : 1.0);
    for (int n = 0; n <= kMaxMomentOrder; ++n) {
      binom[n][0] = 1.0;
      for (int r = 1; r <= n; ++r) binom[n][r] = binom[n - 1][r - 1] + (r <= n - 1 ? binom[n - 1][r] : 0.0);
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

double double_factorial(int m) {
  if (m < -1 || m > kMaxMomentOrder) throw Error(ErrorCode::OrderTooLarge, "double factorial of " + std::to_string(m));
  return tables().dfact[m + 1];
}

double binomial(int n, int r) {
  if (n < 0 || n > kMaxMomentOrder) throw Error(ErrorCode::OrderTooLarge, "binomial row " + std::to_string(n));
  if (r < 0 || r > n) return 0.0;
  return tables().binom[n][r];
}

double MixtureSpec::pmin() const { return *std::min_element(weights.begin(), weights.end()); }

void MixtureSpec::validate_structure() const {
  if (means.empty()) throw Error(ErrorCode::InvalidSpec, "k must be at least 1");
  if (weights.size() != means.size()) throw Error(ErrorCode::InvalidSpec, "weights and means differ in length");
  const int dim = d();
  if (dim < 1 || covariance.cols() != dim) throw Error(ErrorCode::InvalidSpec, "covariance must be square");
  for (const auto& m : means)
    if (m.size() != dim) throw Error(ErrorCode::InvalidSpec, "mean dimension mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::InvalidSpec, "negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorCode::InvalidSpec, "weights do not sum to 1");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, covariance.cwiseAbs().maxCoeff()))
    throw Error(ErrorCode::InvalidCovariance, "covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
    throw Error(ErrorCode::InvalidCovariance, "covariance is not positive semidefinite");
}

void MixtureSpec::validate() const {
  validate_structure();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw Error(ErrorCode::InvalidCovariance, "covariance is not positive definite");
}

SampleSet sample(const MixtureSpec& spec, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::PreconditionFailed, "n must be positive");
  spec.validate_structure();
  Eigen::LLT<Eigen::MatrixXd> llt(spec.covariance);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::InvalidCovariance, "Cholesky factorization failed");
  const Eigen::MatrixXd L = llt.matrixL();

  std::vector<double> cumulative(spec.weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < spec.weights.size(); ++i) cumulative[i] = (acc += spec.weights[i]);

  Rng rng(seed);
  SampleSet out;
  out.seed = seed;
  out.points.resize(n, spec.d());
  std::vector<int> labels(n);
  for (int r = 0; r < n; ++r) {
    const double u = rng.uniform() * acc;
    int c = 0;
    while (c + 1 < spec.k() && !(u < cumulative[c])) ++c;
    // Skip zero-weight components that a boundary draw could land on.
    while (spec.weights[c] == 0.0 && c + 1 < spec.k()) ++c;
    labels[r] = c + 1;
    out.points.row(r) = (spec.means[c] + L * rng.normal_vector(spec.d())).transpose();
  }
  out.labels = std::move(labels);
  return out;
}

double directional_moment_exact(const MixtureSpec& spec, const Eigen::VectorXd& v, int order) {
  if (order % 2 != 0) throw Error(ErrorCode::OddOrder, "order " + std::to_string(order));
  if (order < 2) throw Error(ErrorCode::PreconditionFailed, "order must be at least 2");
  if (order > kMaxMomentOrder) throw Error(ErrorCode::OrderTooLarge, "order " + std::to_string(order));
  spec.validate_structure();
  const double var = v.dot(spec.covariance * v);
  double total = 0.0;
  for (int i = 0; i < spec.k(); ++i) {
    const double m = spec.means[i].dot(v);
    double inner = 0.0;
    for (int j = 0; j <= order; j += 2)
      inner += binomial(order, j) * std::pow(m, order - j) * std::pow(var, j / 2) * double_factorial(j - 1);
    total += spec.weights[i] * inner;
  }
  return total;
}

SeparationReport separation_report(const MixtureSpec& spec) {
  spec.validate();
  const int k = spec.k();
  SeparationReport rep;
  rep.pairwise = Eigen::MatrixXd::Zero(k, k);
  Eigen::LLT<Eigen::MatrixXd> llt(spec.covariance);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const Eigen::VectorXd w = llt.matrixL().solve(spec.means[i] - spec.means[j]);
      rep.pairwise(i, j) = rep.pairwise(j, i) = w.squaredNorm();
    }
  if (k < 2) return rep;
  rep.min_pair = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      rep.min_pair = std::min(rep.min_pair, rep.pairwise(i, j));
      rep.max_pair = std::max(rep.max_pair, rep.pairwise(i, j));
    }
  const double logp = std::log(1.0 / spec.pmin());
  rep.csep_min = rep.min_pair / logp;
  rep.csep_max = rep.max_pair / logp;
  return rep;
}

MixtureSpec pair_difference_spec(const MixtureSpec& spec) {
  spec.validate_structure();
  MixtureSpec z;
  z.covariance = 2.0 * spec.covariance;
  for (int i = 0; i < spec.k(); ++i)
    for (int j = 0; j < spec.k(); ++j) {
      z.means.push_back(spec.means[i] - spec.means[j]);
      z.weights.push_back(spec.weights[i] * spec.weights[j]);
    }
  // Renormalize against rounding in the products.
  double total = 0.0;
  for (double w : z.weights) total += w;
  for (double& w : z.weights) w /= total;
  return z;
}

Eigen::VectorXd population_mean(const MixtureSpec& spec) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(spec.d());
  for (int i = 0; i < spec.k(); ++i) m += spec.weights[i] * spec.means[i];
  return m;
}

Eigen::MatrixXd population_covariance(const MixtureSpec& spec) {
  const Eigen::VectorXd m = population_mean(spec);
  Eigen::MatrixXd c = spec.covariance;
  for (int i = 0; i < spec.k(); ++i) {
    const Eigen::VectorXd dm = spec.means[i] - m;
    c += spec.weights[i] * dm * dm.transpose();
  }
  return c;
}

MixtureSpec transform_spec(const MixtureSpec& spec, const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  MixtureSpec out;
  out.weights = spec.weights;
  out.covariance = A * spec.covariance * A.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  for (const auto& m : spec.means) out.means.push_back(A * m + b);
  return out;
}

std::pair<MixtureSpec, Eigen::MatrixXd> isotropic_position(const MixtureSpec& spec) {
  spec.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(population_covariance(spec));
  const Eigen::MatrixXd W = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  const Eigen::VectorXd b = -W * population_mean(spec);
  return {transform_spec(spec, W, b), W};
}

}  // namespace psos
