#pragma once

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "psos/polynomial.hpp"
#include "psos/tensor.hpp"

namespace psos {

// Monomials of total degree ≤ max_degree in graded-lex order (ties broken
// lexicographically with the first variable largest); index 0 is the constant.
class MonomialBasis {
 public:
  MonomialBasis() = default;
  MonomialBasis(int d, int max_degree);

  int dim() const { return d_; }
  int max_degree() const { return max_degree_; }
  int size() const { return static_cast<int>(monos_.size()); }
  const Exponent& operator[](int i) const { return monos_[i]; }
  int degree(int i) const { return degrees_[i]; }
  // −1 if absent.
  int index(const Exponent& e) const;
  // Index of monomial i times v_j, −1 past max_degree.
  int successor(int i, int j) const { return succ_[static_cast<std::size_t>(i) * d_ + j]; }
  // First index of a given degree.
  int degree_start(int g) const { return starts_[g]; }

 private:
  int d_ = 0, max_degree_ = 0;
  std::vector<Exponent> monos_;
  std::vector<int> degrees_;
  std::vector<int> succ_;
  std::vector<int> starts_;
  std::map<Exponent, int> lookup_;
};

struct ConstraintSystem {
  int d = 0;
  std::vector<Polynomial> equalities;    // q(v) = 0
  std::vector<Polynomial> inequalities;  // q(v) ≥ 0
  std::vector<std::string> equality_names, inequality_names;
  double bound_B = 0.0;  // ‖v‖² ≤ bound_B

  void add_equality(Polynomial q, std::string name = "");
  void add_inequality(Polynomial q, std::string name = "");
};

// {‖v‖² = 1}
ConstraintSystem sphere_system(int d, double bound_B = 2.0);
// v = A w applied to every constraint; bound_B is replaced by the given value.
ConstraintSystem substitute_linear(const ConstraintSystem& sys, const Eigen::MatrixXd& A, double bound_B);

struct CompileOptions {
  // Drop odd moments and split matrices by monomial parity when every
  // constraint is even.
  bool exploit_parity = true;
};

struct SolverFactor;

struct CompiledProblem {
  enum class BlockKind { Main, Localizing, Ball };
  struct Block {
    std::string name;
    BlockKind kind = BlockKind::Main;
    int source = -1;  // inequality index, −1 otherwise
    int parity = -1;  // −1 when not split
    std::vector<int> rows;  // indices into basis
    Polynomial q;
    double weight = 1.0;  // entries are scaled by weight
    int offset = 0;  // into the stacked svec
    int size() const { return static_cast<int>(rows.size()); }
    int svec_size() const { return size() * (size() + 1) / 2; }
  };

  int d = 0, degree = 0, half = 0;
  bool parity = false;
  MonomialBasis moments;  // degree ≤ 2·half
  MonomialBasis basis;    // degree ≤ half
  std::vector<int> var_index;       // per moment, −1 when fixed
  std::vector<double> fixed_value;  // value of fixed moments
  int num_vars = 0;
  std::vector<Block> blocks;
  Eigen::SparseMatrix<double> L;  // stacked svec(blocks) = L x + c
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> A;  // A x = b
  Eigen::VectorXd b;
  std::vector<std::string> equality_row_names;
  bool inconsistent_equalities = false;
  double ball_radius = 0.0;  // the bound used for moment magnitudes
  std::vector<double> moment_bound;  // per variable
  std::shared_ptr<SolverFactor> factor;

  int num_equalities() const { return static_cast<int>(A.rows()) + 1; }
  int main_matrix_dim() const { return basis.size(); }
  int svec_length() const { return static_cast<int>(c.size()); }
  std::vector<int> blocks_of_inequality(int i) const;
  // Replace the constant term of inequality i; only for 1×1 blocks.
  void set_scalar_constant(int inequality_index, double constant);
  // Full moment vector (degree ≤ 2·half) from decision variables.
  std::vector<double> expand(const Eigen::VectorXd& x) const;
  Eigen::VectorXd restrict(const std::vector<double>& moments) const;
};

CompiledProblem compile(const ConstraintSystem& system, int d, int degree, const CompileOptions& opt = {});

struct Residual {
  std::string name;
  double value = 0.0;  // min eigenvalue (weighted) for PSD blocks, |violation| for equalities
};

// Evaluate every compiled condition at a full moment vector.
std::vector<Residual> evaluate_residuals(const CompiledProblem& p, const std::vector<double>& moments);
// True when every PSD residual ≥ −tol and every equality residual ≤ tol.
bool residuals_ok(const std::vector<Residual>& r, double tol);

struct PseudoExpectation {
  MonomialBasis basis;    // degree ≤ t
  MonomialBasis moments;  // degree ≤ 2t
  std::vector<double> moment_vector;
  Eigen::MatrixXd moment_matrix;
  std::vector<Residual> residuals;

  int dim() const { return basis.dim(); }
  int degree() const { return moments.max_degree(); }
  double moment(const Exponent& e) const;
};

PseudoExpectation make_pseudo_expectation(MonomialBasis basis, MonomialBasis moments, std::vector<double> values);
PseudoExpectation point_mass(int d, int degree, const Eigen::VectorXd& v0);
// Ẽ_v[p(v)] = Ẽ_w[p(A w)], A is d_v × d_w.
PseudoExpectation pullback(const PseudoExpectation& pe_w, const Eigen::MatrixXd& A);

double apply(const PseudoExpectation& pe, const Polynomial& p);
SymmetricTensor extract_even_form(const PseudoExpectation& pe, int s);

enum class SolveStatus { Feasible, Infeasible, Undecided };
const char* status_name(SolveStatus s);

struct SolverState {
  Eigen::VectorXd Z, U;
};

struct Certificate {
  double margin = 0.0;  // normalized Farkas gap; > tol for a valid verdict
  double residual_l1 = 0.0;
  double lambda_norm = 0.0;
  std::vector<double> scalar_multipliers;  // Λ entry of each 1×1 block, indexed like blocks
};

struct SolveOptions {
  double alpha = 1.6;  // over-relaxation
  int check_every = 10;
  int stall_window = 2000;
  std::ostream* log = nullptr;
  int log_every = 50;
  const SolverState* warm = nullptr;
  int anderson_memory = 10;  // 0 for plain over-relaxed iterations
};

struct SolveResult {
  SolveStatus status = SolveStatus::Undecided;
  std::optional<PseudoExpectation> pe;
  std::optional<Certificate> certificate;
  SolverState state;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

SolveResult solve_feasible(CompiledProblem& problem, double tol = 1e-6, int max_iters = 50000, const SolveOptions& opt = {});

inline constexpr double kDefaultTol = 1e-6;
inline constexpr int kDefaultMaxIters = 50000;

void write_pseudo_expectation(const std::string& path, const PseudoExpectation& pe);

}  // namespace psos
