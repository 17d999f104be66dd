#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psos/polynomial.hpp"

namespace psos {

inline constexpr double kMaxBasisSize = 1e7;

// Rank/unrank of nondecreasing index tuples (i_1 ≤ … ≤ i_r, each in [0, d))
// in lexicographic order.
class MultisetCodec {
 public:
  MultisetCodec(int d, int r);

  int dim() const { return d_; }
  int order() const { return r_; }
  std::size_t size() const { return size_; }

  std::size_t rank(const std::vector<int>& sorted) const;
  std::vector<int> unrank(std::size_t rank) const;

  static double count(int d, int r);  // binom(d + r − 1, r)

 private:
  // Number of nondecreasing tuples of length len with entries in [lo, d).
  std::size_t tail_count(int lo, int len) const;

  int d_, r_;
  std::size_t size_;
  std::vector<std::vector<std::size_t>> table_;  // table_[lo][len]
};

Exponent to_exponent(const std::vector<int>& sorted, int d);
std::vector<int> to_sorted(const Exponent& e);

class SymmetricTensor {
 public:
  SymmetricTensor() : codec_(1, 0) {}
  SymmetricTensor(int d, int r);

  int dim() const { return codec_.dim(); }
  int order() const { return codec_.order(); }
  std::size_t size() const { return values_.size(); }
  const MultisetCodec& codec() const { return codec_; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double& at(const std::vector<int>& sorted) { return values_[codec_.rank(sorted)]; }
  double at(const std::vector<int>& sorted) const { return values_[codec_.rank(sorted)]; }

  // ⟨T, u^{⊗r}⟩ with multinomial multiplicities folded in.
  double evaluate(const Eigen::VectorXd& u) const;
  // Homogeneous polynomial u ↦ ⟨T, u^{⊗r}⟩.
  Polynomial as_polynomial() const;

  // Calls f(rank, sorted tuple) in rank order.
  template <typename F>
  void for_each(F&& f) const {
    std::vector<int> idx(order(), 0);
    std::size_t rank = 0;
    visit(0, 0, idx, rank, f);
  }

 private:
  template <typename F>
  void visit(int pos, int lo, std::vector<int>& idx, std::size_t& rank, F& f) const {
    if (pos == order()) {
      f(rank++, idx);
      return;
    }
    for (int i = lo; i < dim(); ++i) {
      idx[pos] = i;
      visit(pos + 1, i, idx, rank, f);
    }
  }

  MultisetCodec codec_;
  std::vector<double> values_;
};

// Binary matrix container: 4-byte magic, u32 rows, u32 cols, pad to 16 bytes,
// then rows·cols little-endian f64 in row-major order.
void write_matrix_container(const std::string& path, const char magic[4], const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_container(const std::string& path, const char magic[4]);

// Tensor as a PTEN container plus a JSON manifest of multi-indices at path + ".json".
void write_tensor(const std::string& path, const SymmetricTensor& t);
SymmetricTensor read_tensor(const std::string& path);

}  // namespace psos
