#include "psos/moments.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "psos/error.hpp"
#include "psos/rng.hpp"

namespace psos {

const SymmetricTensor& EmpiricalMoments::tensor(int order) const {
  auto it = tensors.find(order);
  if (it == tensors.end()) throw Error(ErrorCode::MissingOrder, "order " + std::to_string(order) + " not accumulated");
  return it->second;
}

Polynomial EmpiricalMoments::directional_form(int order) const { return tensor(order).as_polynomial(); }

namespace {

// Neumaier-compensated accumulator over a flat array.
struct CompensatedSum {
  std::vector<double> sum, comp;
  explicit CompensatedSum(std::size_t n) : sum(n, 0.0), comp(n, 0.0) {}
  void add(std::size_t i, double x) {
    const double t = sum[i] + x;
    if (std::abs(sum[i]) >= std::abs(x))
      comp[i] += (sum[i] - t) + x;
    else
      comp[i] += (x - t) + sum[i];
    sum[i] = t;
  }
  double value(std::size_t i) const { return sum[i] + comp[i]; }
};

void add_products(const double* y, int d, int r, int pos, int lo, double prod, std::size_t& rank, CompensatedSum& acc) {
  if (pos == r) {
    acc.add(rank++, prod);
    return;
  }
  for (int i = lo; i < d; ++i) add_products(y, d, r, pos + 1, i, prod * y[i], rank, acc);
}

}  // namespace

EmpiricalMoments accumulate(const SampleSet& points, const std::set<int>& orders) {
  const int n = points.n(), d = points.d();
  if (n < 2) throw Error(ErrorCode::PreconditionFailed, "need at least two samples");
  EmpiricalMoments m;
  m.n = n;
  m.mean = Eigen::VectorXd::Zero(d);
  {
    CompensatedSum acc(d);
    for (int r = 0; r < n; ++r)
      for (int i = 0; i < d; ++i) acc.add(i, points.points(r, i));
    for (int i = 0; i < d; ++i) m.mean[i] = acc.value(i) / n;
  }
  {
    CompensatedSum acc(static_cast<std::size_t>(d) * d);
    for (int r = 0; r < n; ++r)
      for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j)
          acc.add(i * d + j, (points.points(r, i) - m.mean[i]) * (points.points(r, j) - m.mean[j]));
    m.covariance.resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) m.covariance(i, j) = m.covariance(j, i) = acc.value(i * d + j) / n;
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = points.points;
  for (int order : orders) {
    if (order < 1) throw Error(ErrorCode::PreconditionFailed, "orders must be positive");
    SymmetricTensor t(d, order);
    CompensatedSum acc(t.size());
    for (int r = 0; r < n; ++r) {
      std::size_t rank = 0;
      add_products(rows.row(r).data(), d, order, 0, 0, 1.0, rank, acc);
    }
    for (std::size_t i = 0; i < t.size(); ++i) t.values()[i] = acc.value(i) / n;
    m.tensors.emplace(order, std::move(t));
  }
  return m;
}

namespace {

// E[x^α] for x ~ N(μ, Σ), via E[x_i x^β] = μ_i E[x^β] + Σ_j Σ_ij β_j E[x^{β−e_j}].
class GaussianMoments {
 public:
  GaussianMoments(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) : mu_(mu), sigma_(sigma) {}

  double operator()(const Exponent& a) {
    auto it = memo_.find(a);
    if (it != memo_.end()) return it->second;
    int i = 0;
    while (i < static_cast<int>(a.size()) && a[i] == 0) ++i;
    double val = 1.0;
    if (i < static_cast<int>(a.size())) {
      Exponent b = a;
      --b[i];
      val = mu_[i] * (*this)(b);
      for (int j = 0; j < static_cast<int>(b.size()); ++j)
        if (b[j] > 0 && sigma_(i, j) != 0.0) {
          Exponent c = b;
          --c[j];
          val += sigma_(i, j) * b[j] * (*this)(c);
        }
    }
    memo_.emplace(a, val);
    return val;
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd sigma_;
  std::map<Exponent, double> memo_;
};

}  // namespace

EmpiricalMoments exact_moments(const MixtureSpec& spec, const std::set<int>& orders) {
  spec.validate_structure();
  const int d = spec.d();
  EmpiricalMoments m;
  m.n = 0;
  m.mean = population_mean(spec);
  m.covariance = population_covariance(spec);
  std::vector<GaussianMoments> comps;
  for (int i = 0; i < spec.k(); ++i) comps.emplace_back(spec.means[i], spec.covariance);
  for (int order : orders) {
    SymmetricTensor t(d, order);
    t.for_each([&](std::size_t rank, const std::vector<int>& idx) {
      const Exponent e = to_exponent(idx, d);
      double v = 0.0;
      for (int i = 0; i < spec.k(); ++i) v += spec.weights[i] * comps[i](e);
      t.values()[rank] = v;
    });
    m.tensors.emplace(order, std::move(t));
  }
  return m;
}

double directional_moment_empirical(const EmpiricalMoments& m, const Eigen::VectorXd& v, int order) {
  return m.tensor(order).evaluate(v);
}

SampleSet pair_differences(const SampleSet& points, long max_pairs, std::uint64_t seed) {
  const long n = points.n();
  if (n < 2) throw Error(ErrorCode::PreconditionFailed, "need at least two samples");
  const long total = n * (n - 1);
  std::vector<long> ranks;
  if (max_pairs >= total) {
    ranks.resize(total);
    for (long r = 0; r < total; ++r) ranks[r] = r;
  } else {
    // Floyd's sampling without replacement.
    Rng rng(seed);
    std::unordered_set<long> chosen;
    chosen.reserve(static_cast<std::size_t>(max_pairs) * 2);
    for (long j = total - max_pairs; j < total; ++j) {
      const long t = static_cast<long>(rng.below(static_cast<std::uint64_t>(j + 1)));
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    ranks.assign(chosen.begin(), chosen.end());
    std::sort(ranks.begin(), ranks.end());
  }
  SampleSet out;
  out.seed = seed;
  out.points.resize(static_cast<Eigen::Index>(ranks.size()), points.d());
  std::vector<std::pair<int, int>> pl;
  for (std::size_t r = 0; r < ranks.size(); ++r) {
    const long i = ranks[r] / (n - 1);
    long j = ranks[r] % (n - 1);
    if (j >= i) ++j;
    out.points.row(r) = points.points.row(i) - points.points.row(j);
    if (points.labels) pl.emplace_back((*points.labels)[i], (*points.labels)[j]);
  }
  if (points.labels) out.pair_labels = std::move(pl);
  return out;
}

double closeness_gap(const EmpiricalMoments& m, const MixtureSpec& spec, int order, int trials, std::uint64_t seed) {
  Rng rng(seed);
  double gap = 0.0;
  for (int i = 0; i < trials; ++i) {
    const Eigen::VectorXd v = rng.unit_vector(m.d());
    gap = std::max(gap, std::abs(directional_moment_empirical(m, v, order) - directional_moment_exact(spec, v, order)));
  }
  return gap;
}

}  // namespace psos
