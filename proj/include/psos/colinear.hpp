#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psos/direction.hpp"
#include "psos/mixture.hpp"

namespace psos {

struct WhiteningTransform {
  Eigen::MatrixXd W_hat;  // Λ̂^{-1/2} Ûᵀ
  Eigen::VectorXd mean_hat;
  Eigen::MatrixXd source_cov;
  Eigen::MatrixXd U_hat;  // eigenvectors of source_cov
  Eigen::VectorXd Lambda_hat;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return W_hat * (x - mean_hat); }
};

// y = Ŵ (x − mean), with empirical covariance of y equal to I.
std::pair<WhiteningTransform, SampleSet> whiten(const SampleSet& points);

struct SigmaIdentity {
  double lhs = 0.0;  // u0ᵀ cov⁻¹ u0 / u0ᵀ Σ⁰⁻¹ u0
  double rhs = 0.0;  // uᵀ Σ u after exact whitening
};

SigmaIdentity sigma_sq_identity_check(const MixtureSpec& spec, const Eigen::VectorXd& u0);

struct ColinearInstance {
  MixtureSpec spec;
  Eigen::VectorXd u0;  // unit direction of the means
};

// Σ⁰ = Q diag(condition^{i/(d−1)}) Qᵀ for random orthogonal Q, equal weights,
// means at offset + (i − (k−1)/2)·a·u0 with adjacent Mahalanobis distance `spacing`.
ColinearInstance make_colinear_instance(std::uint64_t seed, int k, int d, double condition, double spacing);

struct Clusters1D {
  std::vector<int> assignment;  // 1-based, ordered by position
  int k_found = 0;
  std::vector<double> cuts;  // boundaries between consecutive clusters
};

Clusters1D cluster_1d(const std::vector<double>& values, double gap);
// Contiguous k-means on the line: Lloyd iterations from quantile centers.
Clusters1D kmeans_1d(const std::vector<double>& values, int k);

enum class GapPolicy { Mad, ExpectedK, Fixed };

struct GapChoice {
  GapPolicy policy = GapPolicy::Mad;
  double fixed = 0.0;   // Fixed
  int expected_k = 0;   // ExpectedK: k-means cuts instead of a gap
  double multiple = 6.0;  // Mad: gap = multiple · std estimate
};

const char* gap_policy_name(GapPolicy p);

// 1.4826 · MAD of the densest window of ⌈fraction · n⌉ sorted values.
double densest_window_std(const std::vector<double>& values, double fraction);

struct Misclassification {
  double rate = 0.0;
  std::vector<int> permutation;  // permutation[i] = cluster matched to component i + 1
  bool greedy = false;           // k > 8 falls back to greedy matching
};

// 1 − max over matchings of Σ |C_i ∩ S_π(i)| / n, labels and assignment 1-based.
Misclassification best_permutation_error(const std::vector<int>& labels, const std::vector<int>& assignment);

struct ClusteringResult {
  std::vector<int> assignment;
  int k_found = 0;
  std::optional<double> misclassification;
  std::vector<int> permutation;
  bool greedy_matching = false;
  DirectionResult direction;
  Eigen::VectorXd direction_original;  // Ŵᵀ û, normalized
  double sigma_sq = 0.0;
  double gap = 0.0;  // 0 under ExpectedK
  std::vector<double> cuts;
  double projection_scale = 0.0;  // √(2(C+1)σ²)
  std::string gap_policy;
};

inline constexpr double kProjectionC = 320.0;

// truth: direction of the means in the input coordinates.
ClusteringResult run_colinear(const SampleSet& points, const DirectionConfig& cfg, const GapChoice& gap, std::uint64_t seed,
                              const std::optional<Eigen::VectorXd>& truth = std::nullopt);

}  // namespace psos
