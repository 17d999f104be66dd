#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "psos/mixture.hpp"
#include "psos/rng.hpp"

namespace testing_helpers {

inline Eigen::MatrixXd random_spd(psos::Rng& rng, int d, double floor = 0.5) {
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = rng.normal();
  return A * A.transpose() / d + floor * Eigen::MatrixXd::Identity(d, d);
}

inline psos::MixtureSpec random_spec(psos::Rng& rng, int k, int d, double mean_scale = 2.0) {
  psos::MixtureSpec s;
  s.covariance = random_spd(rng, d);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    s.means.push_back(mean_scale * rng.normal_vector(d));
    s.weights.push_back(0.2 + rng.uniform());
    total += s.weights.back();
  }
  for (double& w : s.weights) w /= total;
  return s;
}

// Monte Carlo mean of ⟨y, v⟩^order.
inline double mc_moment(const Eigen::MatrixXd& points, const Eigen::VectorXd& v, int order) {
  const Eigen::VectorXd proj = points * v;
  double s = 0.0;
  for (Eigen::Index i = 0; i < proj.size(); ++i) s += std::pow(proj[i], order);
  return s / proj.size();
}

// Random colinear spec: means at offset + a_i u0, random SPD covariance, random weights.
inline psos::MixtureSpec random_colinear(psos::Rng& rng, int k, int d, Eigen::VectorXd& u0) {
  u0 = rng.unit_vector(d);
  psos::MixtureSpec s;
  s.covariance = random_spd(rng, d);
  const Eigen::VectorXd offset = rng.normal_vector(d);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    s.means.push_back(offset + 4.0 * rng.normal() * u0);
    s.weights.push_back(0.2 + rng.uniform());
    total += s.weights.back();
  }
  for (double& w : s.weights) w /= total;
  return s;
}

inline psos::MixtureSpec isotropic_gaussian(int d) {
  psos::MixtureSpec s;
  s.means = {Eigen::VectorXd::Zero(d)};
  s.covariance = Eigen::MatrixXd::Identity(d, d);
  s.weights = {1.0};
  return s;
}

}  // namespace testing_helpers
