#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace psos {

struct MixtureSpec {
  std::vector<Eigen::VectorXd> means;
  Eigen::MatrixXd covariance;
  std::vector<double> weights;

  int k() const { return static_cast<int>(means.size()); }
  int d() const { return static_cast<int>(covariance.rows()); }
  double pmin() const;

  // Full validation: dimensions, weights, symmetric positive-definite covariance.
  void validate() const;
  // Same, but the covariance only needs to be positive semidefinite.
  void validate_structure() const;
};

struct SeparationReport {
  Eigen::MatrixXd pairwise;  // ‖Σ^{-1/2}(μ_i − μ_j)‖²
  double min_pair = 0.0;
  double max_pair = 0.0;
  double csep_min = 0.0;  // min_pair / ln(1/pmin)
  double csep_max = 0.0;  // max_pair / ln(1/pmin)
};

struct AffineTransform {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd offset;  // x -> matrix·x + offset
};

struct SampleSet {
  Eigen::MatrixXd points;  // n × d, one sample per row
  std::optional<std::vector<int>> labels;  // 1-based component index
  std::optional<std::vector<std::pair<int, int>>> pair_labels;
  std::uint64_t seed = 0;
  std::vector<AffineTransform> transform_log;

  int n() const { return static_cast<int>(points.rows()); }
  int d() const { return static_cast<int>(points.cols()); }
};

SampleSet sample(const MixtureSpec& spec, int n, std::uint64_t seed);

// E⟨y, v⟩^order in closed form.
double directional_moment_exact(const MixtureSpec& spec, const Eigen::VectorXd& v, int order);

SeparationReport separation_report(const MixtureSpec& spec);

// Spec of z = y − y' for independent y, y'.
MixtureSpec pair_difference_spec(const MixtureSpec& spec);

Eigen::VectorXd population_mean(const MixtureSpec& spec);
Eigen::MatrixXd population_covariance(const MixtureSpec& spec);

// Image of the spec under x -> A x + b.
MixtureSpec transform_spec(const MixtureSpec& spec, const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

// Exact isotropic position: returns the transformed spec and W = cov^{-1/2}
// (symmetric); the affine map is x -> W (x − E y).
std::pair<MixtureSpec, Eigen::MatrixXd> isotropic_position(const MixtureSpec& spec);

// Table lookups, exposed for tests; order limit is 64.
double double_factorial(int m);
double binomial(int n, int r);
inline constexpr int kMaxMomentOrder = 64;

}  // namespace psos
