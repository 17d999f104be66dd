#include "psos/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "psos/error.hpp"

namespace psos {

double MultisetCodec::count(int d, int r) {
  double c = 1.0;
  for (int j = 1; j <= r; ++j) c = c * (d + j - 1) / j;
  return std::round(c);
}

MultisetCodec::MultisetCodec(int d, int r) : d_(d), r_(r) {
  if (count(d, r) > kMaxBasisSize)
    throw Error(ErrorCode::BasisTooLarge, "binom(d+r-1, r) exceeds 1e7 for d=" + std::to_string(d) + ", r=" + std::to_string(r));
  table_.assign(d + 1, std::vector<std::size_t>(r + 1, 0));
  for (int lo = d; lo >= 0; --lo)
    for (int len = 0; len <= r; ++len) {
      if (len == 0) {
        table_[lo][len] = 1;
      } else if (lo == d) {
        table_[lo][len] = 0;
      } else {
        // Either the first entry is lo, or every entry is > lo.
        table_[lo][len] = table_[lo][len - 1] + table_[lo + 1][len];
      }
    }
  size_ = table_[0][r];
}

std::size_t MultisetCodec::tail_count(int lo, int len) const { return table_[lo][len]; }

std::size_t MultisetCodec::rank(const std::vector<int>& sorted) const {
  std::size_t rk = 0;
  int lo = 0;
  for (int p = 0; p < r_; ++p) {
    for (int x = lo; x < sorted[p]; ++x) rk += tail_count(x, r_ - p - 1);
    lo = sorted[p];
  }
  return rk;
}

std::vector<int> MultisetCodec::unrank(std::size_t rk) const {
  std::vector<int> out(r_);
  int lo = 0;
  for (int p = 0; p < r_; ++p) {
    int x = lo;
    while (rk >= tail_count(x, r_ - p - 1)) {
      rk -= tail_count(x, r_ - p - 1);
      ++x;
    }
    out[p] = x;
    lo = x;
  }
  return out;
}

Exponent to_exponent(const std::vector<int>& sorted, int d) {
  Exponent e(d, 0);
  for (int i : sorted) ++e[i];
  return e;
}

std::vector<int> to_sorted(const Exponent& e) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(e.size()); ++i)
    for (int j = 0; j < e[i]; ++j) out.push_back(i);
  return out;
}

SymmetricTensor::SymmetricTensor(int d, int r) : codec_(d, r), values_(codec_.size(), 0.0) {}

double SymmetricTensor::evaluate(const Eigen::VectorXd& u) const {
  double total = 0.0;
  for_each([&](std::size_t rank, const std::vector<int>& idx) {
    double m = values_[rank] * multinomial(to_exponent(idx, dim()));
    for (int i : idx) m *= u[i];
    total += m;
  });
  return total;
}

Polynomial SymmetricTensor::as_polynomial() const {
  Polynomial p(dim());
  for_each([&](std::size_t rank, const std::vector<int>& idx) {
    const Exponent e = to_exponent(idx, dim());
    p.add_term(e, values_[rank] * multinomial(e));
  });
  return p;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8), static_cast<unsigned char>(x >> 16),
                        static_cast<unsigned char>(x >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

}  // namespace

void write_matrix_container(const std::string& path, const char magic[4], const Eigen::MatrixXd& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
  os.write(magic, 4);
  put_u32(os, static_cast<std::uint32_t>(m.rows()));
  put_u32(os, static_cast<std::uint32_t>(m.cols()));
  put_u32(os, 0);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(os, m(r, c));
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Eigen::MatrixXd read_matrix_container(const std::string& path, const char magic[4]) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  char got[4];
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0) throw Error(ErrorCode::IoError, "bad magic in " + path);
  const std::uint32_t rows = get_u32(is), cols = get_u32(is);
  get_u32(is);
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = get_f64(is);
  if (!is) throw Error(ErrorCode::IoError, "truncated container " + path);
  return m;
}

void write_tensor(const std::string& path, const SymmetricTensor& t) {
  Eigen::MatrixXd col(t.size(), 1);
  for (std::size_t i = 0; i < t.size(); ++i) col(i, 0) = t.values()[i];
  write_matrix_container(path, "PTEN", col);
  nlohmann::json manifest;
  manifest["dimension"] = t.dim();
  manifest["order"] = t.order();
  nlohmann::json idx = nlohmann::json::array();
  t.for_each([&](std::size_t, const std::vector<int>& s) { idx.push_back(s); });
  manifest["multi_indices"] = idx;
  std::ofstream os(path + ".json");
  os << manifest.dump(1) << "\n";
}

SymmetricTensor read_tensor(const std::string& path) {
  std::ifstream ms(path + ".json");
  if (!ms) throw Error(ErrorCode::IoError, "missing manifest for " + path);
  const nlohmann::json manifest = nlohmann::json::parse(ms);
  SymmetricTensor t(manifest.at("dimension").get<int>(), manifest.at("order").get<int>());
  const Eigen::MatrixXd col = read_matrix_container(path, "PTEN");
  if (static_cast<std::size_t>(col.rows()) != t.size()) throw Error(ErrorCode::IoError, "tensor size mismatch in " + path);
  for (std::size_t i = 0; i < t.size(); ++i) t.values()[i] = col(i, 0);
  return t;
}

}  // namespace psos
