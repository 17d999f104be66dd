#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "psos/moments.hpp"
#include "psos/sos.hpp"

namespace psos {

struct SeparatorConfig {
  std::string profile = "desk";
  int s = 1;
  int t = 3;
  double c_lb = 1.0;        // Ê⟨z,v⟩^{2s} ≥ c_lb^s − eta
  double C_ub = 30.0;       // Ê⟨z,v⟩^{2t} ≤ C_ub^t + eta
  double norm_bound = 8.08; // ‖ĉov(z)^{1/2} v‖² ≤ norm_bound
  double eta = 0.005;
  // Replace C_ub by (1 + upper_slack)·C_real, where C_real^t is the smallest
  // Ê⟨z,v⟩^{2t} found over real v meeting the other two constraints.
  bool calibrate_upper = false;
  double upper_slack = 0.05;
  int calibration_starts = 32;
  int repeats = 16;  // pivots tried by greedy_bipartition
  long max_pairs_factor = 20;
  double tol = kDefaultTol;
  int max_iters = kDefaultMaxIters;
  SolveOptions solver;

  void validate() const;
  static SeparatorConfig paper(double pmin);
  static SeparatorConfig desk(double pmin);
};

int default_s(double pmin);

ConstraintSystem build_constraints(const EmpiricalMoments& zm, const SeparatorConfig& cfg);

struct SeparatingPolynomial {
  SymmetricTensor tensor;  // Ẽ v^{⊗2s}
  int s = 1;
  double scale = 1.0;  // distances are scale · q(x − y)^{1/2s}
  std::vector<Residual> residuals;

  SeparatingPolynomial() = default;
  SeparatingPolynomial(SymmetricTensor t, int s);
  double q(const Eigen::VectorXd& u) const;

 private:
  std::vector<double> coef_;  // multinomial-weighted entries
  std::vector<int> idx_;      // 2s variable indices per entry
};

SeparatingPolynomial make_separating_polynomial(const PseudoExpectation& pe, int s);

double pair_distance(const SeparatingPolynomial& q, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct Bipartition {
  std::vector<int> side_a, side_b;  // 0-based sample indices
  int pivot = -1;
  double threshold = 0.0;
  double score = 0.0;
  bool degenerate = false;
  // With labels: best fraction of any single component captured by each side.
  std::optional<double> overlap_a, overlap_b;
  std::optional<int> component_a, component_b;

  double min_overlap() const { return std::min(overlap_a.value_or(0.0), overlap_b.value_or(0.0)); }
};

Bipartition greedy_bipartition(const SampleSet& points, const SeparatingPolynomial& q, double threshold, std::uint64_t seed,
                               int repeats = 16);

enum class ThresholdPolicy { Fixed, LabeledQuantile, Knee };

struct ThresholdChoice {
  double scale = 1.0;      // applied to q distances
  double threshold = 0.0;  // in scaled units
  std::string policy;
};

// Median normalization and threshold selection on sampled pairs.
ThresholdChoice choose_threshold(const SampleSet& points, const SeparatingPolynomial& q, ThresholdPolicy policy, double fixed,
                                 std::uint64_t seed, int pairs = 20000);

struct SeparatorSolve {
  SolveStatus status = SolveStatus::Undecided;
  std::optional<PseudoExpectation> pe;  // in the original coordinates
  double C_used = 0.0;
  double C_real = 0.0;  // calibration only
  Eigen::VectorXd witness;  // calibration only, original coordinates
  double upper_value = 0.0;  // Ẽ Ê⟨z,v⟩^{2t}
  int probes = 0;
  int iterations = 0;
};

// Solve the constraint system in whitened z coordinates and map back.
SeparatorSolve solve_separator(const EmpiricalMoments& zm, const SeparatorConfig& cfg);

struct SeparatorRun {
  SeparatorSolve solve;
  std::optional<SeparatingPolynomial> q;
  ThresholdChoice threshold;
  Bipartition split;
  double median_ratio = 0.0;  // median cross / same q-ratio when labels exist
};

SeparatorRun run_separator(const SampleSet& points, const SeparatorConfig& cfg, ThresholdPolicy policy, std::uint64_t seed,
                           double fixed_threshold = 0.0);

// Median over sampled pairs of q(y_i − y_j), cross-component over same-component.
double median_cross_same_ratio(const SampleSet& points, const SeparatingPolynomial& q, std::uint64_t seed, int pairs = 20000);

}  // namespace psos
