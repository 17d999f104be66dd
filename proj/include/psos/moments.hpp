#pragma once

#include <cstdint>
#include <map>
#include <set>

#include <Eigen/Dense>

#include "psos/mixture.hpp"
#include "psos/tensor.hpp"

namespace psos {

struct EmpiricalMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::map<int, SymmetricTensor> tensors;  // order -> Ê y^{⊗order}
  int n = 0;  // 0 marks population (exact) moments

  int d() const { return static_cast<int>(mean.size()); }
  const SymmetricTensor& tensor(int order) const;
  // Ê⟨y, v⟩^order as a polynomial in v.
  Polynomial directional_form(int order) const;
};

EmpiricalMoments accumulate(const SampleSet& points, const std::set<int>& orders);

// Population moment tensors of a mixture, in the same container.
EmpiricalMoments exact_moments(const MixtureSpec& spec, const std::set<int>& orders);

double directional_moment_empirical(const EmpiricalMoments& m, const Eigen::VectorXd& v, int order);

SampleSet pair_differences(const SampleSet& points, long max_pairs, std::uint64_t seed);
inline long default_max_pairs(int n) { return 20L * n; }

double closeness_gap(const EmpiricalMoments& m, const MixtureSpec& spec, int order, int trials, std::uint64_t seed);
inline constexpr int kDefaultClosenessTrials = 256;

}  // namespace psos
