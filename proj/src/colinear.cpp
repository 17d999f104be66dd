#include "psos/colinear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psos/error.hpp"
#include "psos/moments.hpp"
#include "psos/rng.hpp"

namespace psos {

std::pair<WhiteningTransform, SampleSet> whiten(const SampleSet& points) {
  const EmpiricalMoments m = accumulate(points, {});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.covariance);
  const Eigen::VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-10 * ev.maxCoeff()))
    throw Error(ErrorCode::RankDeficient, "sample covariance is not positive definite; reduce the dimension first");
  WhiteningTransform w;
  w.mean_hat = m.mean;
  w.source_cov = m.covariance;
  w.U_hat = es.eigenvectors();
  w.Lambda_hat = ev;
  w.W_hat = ev.cwiseInverse().cwiseSqrt().asDiagonal() * w.U_hat.transpose();
  SampleSet out = points;
  out.points = (points.points.rowwise() - m.mean.transpose()) * w.W_hat.transpose();
  out.transform_log.push_back({w.W_hat, -w.W_hat * m.mean});
  return {w, out};
}

SigmaIdentity sigma_sq_identity_check(const MixtureSpec& spec, const Eigen::VectorXd& u0_in) {
  spec.validate();
  if (u0_in.size() != spec.d() || !(u0_in.norm() > 0.0)) throw Error(ErrorCode::PreconditionFailed, "u0 must be a nonzero d-vector");
  const Eigen::VectorXd u0 = u0_in.normalized();
  for (int i = 1; i < spec.k(); ++i) {
    const Eigen::VectorXd diff = spec.means[i] - spec.means[0];
    if ((diff - diff.dot(u0) * u0).norm() > 1e-8 * std::max(1.0, diff.norm()))
      throw Error(ErrorCode::NotColinear, "means are not on a line along u0");
  }
  const Eigen::MatrixXd cov = population_covariance(spec);
  SigmaIdentity out;
  out.lhs = u0.dot(cov.ldlt().solve(u0)) / u0.dot(spec.covariance.ldlt().solve(u0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::MatrixXd W = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  const Eigen::VectorXd u = (W * u0).normalized();
  out.rhs = u.dot(W * spec.covariance * W.transpose() * u);
  return out;
}

ColinearInstance make_colinear_instance(std::uint64_t seed, int k, int d, double condition, double spacing) {
  if (k < 1 || d < 1) throw Error(ErrorCode::ParamOutOfRange, "k and d must be positive");
  if (!(condition >= 1.0) || !(spacing >= 0.0)) throw Error(ErrorCode::ParamOutOfRange, "condition must be >= 1 and spacing >= 0");
  Rng rng(seed);
  Eigen::MatrixXd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = rng.normal();
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  Eigen::VectorXd ev(d);
  for (int i = 0; i < d; ++i) ev[i] = d == 1 ? 1.0 : std::pow(condition, static_cast<double>(i) / (d - 1));
  ColinearInstance out;
  out.spec.covariance = Q * ev.asDiagonal() * Q.transpose();
  out.u0 = rng.unit_vector(d);
  const double a = spacing / std::sqrt(out.u0.dot(out.spec.covariance.ldlt().solve(out.u0)));
  const Eigen::VectorXd offset = rng.normal_vector(d);
  for (int i = 0; i < k; ++i) {
    out.spec.means.push_back(offset + (i - 0.5 * (k - 1)) * a * out.u0);
    out.spec.weights.push_back(1.0 / k);
  }
  return out;
}

Clusters1D cluster_1d(const std::vector<double>& values, double gap) {
  if (!(gap > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "gap must be positive");
  const int n = static_cast<int>(values.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
  Clusters1D out;
  out.assignment.assign(n, 0);
  if (n == 0) return out;
  int label = 1;
  out.assignment[order[0]] = label;
  for (int i = 1; i < n; ++i) {
    if (values[order[i]] - values[order[i - 1]] >= gap) {
      ++label;
      out.cuts.push_back(0.5 * (values[order[i]] + values[order[i - 1]]));
    }
    out.assignment[order[i]] = label;
  }
  out.k_found = label;
  return out;
}

const char* gap_policy_name(GapPolicy p) {
  switch (p) {
    case GapPolicy::Mad: return "mad";
    case GapPolicy::ExpectedK: return "expected_k";
    case GapPolicy::Fixed: return "fixed";
  }
  return "unknown";
}

double densest_window_std(const std::vector<double>& values, double fraction) {
  const int n = static_cast<int>(values.size());
  if (n < 2) throw Error(ErrorCode::PreconditionFailed, "need at least two values");
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  const int w = std::clamp(static_cast<int>(std::ceil(fraction * n)), 2, n);
  int best = 0;
  for (int i = 1; i + w <= n; ++i)
    if (v[i + w - 1] - v[i] < v[best + w - 1] - v[best]) best = i;
  std::vector<double> win(v.begin() + best, v.begin() + best + w);
  auto median = [](std::vector<double> x) {
    const std::size_t h = x.size() / 2;
    std::nth_element(x.begin(), x.begin() + h, x.end());
    const double hi = x[h];
    if (x.size() % 2) return hi;
    return 0.5 * (hi + *std::max_element(x.begin(), x.begin() + h));
  };
  const double med = median(win);
  for (double& x : win) x = std::abs(x - med);
  return 1.4826 * median(win);
}

Clusters1D kmeans_1d(const std::vector<double>& values, int k) {
  if (k < 1) throw Error(ErrorCode::ParamOutOfRange, "expected k must be at least 1");
  const int n = static_cast<int>(values.size());
  if (n < k) throw Error(ErrorCode::ParamOutOfRange, "fewer values than expected clusters");
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  std::vector<double> prefix(n + 1, 0.0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + v[i];
  std::vector<int> start(k + 1);  // cluster j holds sorted indices [start[j], start[j + 1])
  for (int j = 0; j <= k; ++j) start[j] = static_cast<int>(static_cast<long>(j) * n / k);
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<double> center(k);
    for (int j = 0; j < k; ++j)
      center[j] = start[j + 1] > start[j] ? (prefix[start[j + 1]] - prefix[start[j]]) / (start[j + 1] - start[j])
                                          : (j > 0 ? center[j - 1] : v.front());
    std::vector<int> next(k + 1);
    next[0] = 0;
    next[k] = n;
    for (int j = 1; j < k; ++j) {
      const double cut = 0.5 * (center[j - 1] + center[j]);
      next[j] = std::max(next[j - 1], static_cast<int>(std::lower_bound(v.begin(), v.end(), cut) - v.begin()));
    }
    if (next == start) break;
    start = next;
  }
  std::vector<double> cuts;
  for (int j = 1; j < k; ++j)
    if (start[j] > 0 && start[j] < n && start[j] > start[j - 1] && v[start[j]] > v[start[j] - 1])
      cuts.push_back(0.5 * (v[start[j] - 1] + v[start[j]]));
  Clusters1D out;
  out.cuts = cuts;
  out.k_found = static_cast<int>(cuts.size()) + 1;
  out.assignment.resize(n);
  for (int i = 0; i < n; ++i)
    out.assignment[i] = 1 + static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), values[i]) - cuts.begin());
  return out;
}

Misclassification best_permutation_error(const std::vector<int>& labels, const std::vector<int>& assignment) {
  if (labels.size() != assignment.size() || labels.empty()) throw Error(ErrorCode::PreconditionFailed, "labels and assignment must match");
  const int k = *std::max_element(labels.begin(), labels.end());
  const int kf = *std::max_element(assignment.begin(), assignment.end());
  const int K = std::max(k, kf);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(K, K);  // component × cluster
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || assignment[i] < 1) throw Error(ErrorCode::PreconditionFailed, "labels and assignment are 1-based");
    C(labels[i] - 1, assignment[i] - 1) += 1.0;
  }
  Misclassification out;
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  if (K <= 8) {
    do {
      double hit = 0.0;
      for (int i = 0; i < K; ++i) hit += C(i, perm[i]);
      if (hit > best) {
        best = hit;
        out.permutation = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    out.greedy = true;
    std::vector<bool> row_used(K, false), col_used(K, false);
    out.permutation.assign(K, -1);
    best = 0.0;
    for (int step = 0; step < K; ++step) {
      int bi = -1, bj = -1;
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j)
          if (!row_used[i] && !col_used[j] && (bi < 0 || C(i, j) > C(bi, bj))) bi = i, bj = j;
      row_used[bi] = col_used[bj] = true;
      out.permutation[bi] = bj;
      best += C(bi, bj);
    }
  }
  for (int& p : out.permutation) ++p;
  out.rate = 1.0 - best / static_cast<double>(labels.size());
  return out;
}

ClusteringResult run_colinear(const SampleSet& points, const DirectionConfig& cfg, const GapChoice& gap, std::uint64_t seed,
                              const std::optional<Eigen::VectorXd>& truth) {
  cfg.validate();
  const auto [wt, y] = whiten(points);
  ClusteringResult out;
  out.sigma_sq = cfg.sigma_mode == SigmaMode::Oracle ? *cfg.sigma_sq : estimate_sigma_sq(y, seed);
  const EmpiricalMoments m = accumulate(y, {2 * cfg.s, 2 * cfg.t});
  std::optional<Eigen::VectorXd> u_white;
  if (truth) u_white = (wt.W_hat * *truth).normalized();
  out.direction = recover_direction(m, cfg, out.sigma_sq, u_white);
  out.direction_original = (wt.W_hat.transpose() * out.direction.u_hat).normalized();
  out.projection_scale = std::sqrt(2.0 * (kProjectionC + 1.0) * out.sigma_sq);
  std::vector<double> proj(y.n());
  for (int i = 0; i < y.n(); ++i) proj[i] = y.points.row(i).dot(out.direction.u_hat) / out.projection_scale;
  out.gap_policy = gap_policy_name(gap.policy);
  Clusters1D cl;
  if (gap.policy == GapPolicy::ExpectedK) {
    cl = kmeans_1d(proj, gap.expected_k);
  } else {
    out.gap = gap.policy == GapPolicy::Mad ? gap.multiple * densest_window_std(proj, 0.5 * cfg.pmin) : gap.fixed;
    if (!(out.gap > 0.0)) throw Error(ErrorCode::EstimationFailed, "gap estimate is not positive");
    cl = cluster_1d(proj, out.gap);
  }
  out.assignment = cl.assignment;
  out.k_found = cl.k_found;
  out.cuts = cl.cuts;
  if (points.labels) {
    const Misclassification mc = best_permutation_error(*points.labels, out.assignment);
    out.misclassification = mc.rate;
    out.permutation = mc.permutation;
    out.greedy_matching = mc.greedy;
  }
  return out;
}

}  // namespace psos
