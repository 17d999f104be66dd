#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psos/moments.hpp"
#include "psos/sos.hpp"

namespace psos {

enum class SigmaMode { Oracle, Estimated };

struct DirectionConfig {
  std::string profile = "desk";
  int s = 1;
  int t = 4;
  int k = 2;
  double pmin = 0.5;
  double C_sep = 1.0;
  double tau = 0.0;  // 800e / (C_sep k²)
  // ≤ 0 selects σ²/(100M) and σ²/10000.
  double resolution_u = 0.0;
  double resolution_l = 0.0;
  SigmaMode sigma_mode = SigmaMode::Estimated;
  std::optional<double> sigma_sq;  // required for the oracle mode
  int max_probes = 64;
  int probe_max_iters = 4000;
  double tol = kDefaultTol;

  void validate() const;
  // Theoretical constants: s = ⌈ln(1/pmin)⌉, t = 5000s.
  static DirectionConfig paper(double pmin, int k, double C_sep);
  // t = 4s, with s lowered until the degree-2t moment matrix in dimension d
  // has at most max_basis rows.
  static DirectionConfig desk(double pmin, int k, double C_sep, int d, int max_basis = 600);
};

struct ProbeRecord {
  double T = 0.0;
  SolveStatus status = SolveStatus::Undecided;
  int iterations = 0;
};

struct SearchResult {
  double T = 0.0;
  std::optional<PseudoExpectation> pe;
  int probes = 0;
  int undecided = 0;
  int iterations = 0;
  double lo = 0.0, hi = 0.0;  // final bracket
  std::vector<ProbeRecord> trace;
};

// Largest T with {‖v‖² = 1, Ê⟨y,v⟩^{2s} ≥ T} feasible at degree 2s, over [0, pmin^{-s}].
SearchResult search_max_moment(const EmpiricalMoments& m, const DirectionConfig& cfg, double resolution);
// Smallest T with {‖v‖² = 1, Ê⟨y,v⟩^{2t} ≤ T} feasible at degree 2t, over [0, (1/pmin + e t)^t].
SearchResult search_min_moment(const EmpiricalMoments& m, const DirectionConfig& cfg, double resolution);

struct Rank1 {
  Eigen::VectorXd u;
  bool degenerate = false;  // top two eigenvalues within 1e-12
  double top = 0.0, second = 0.0;
};

Rank1 round_rank1(const Eigen::MatrixXd& M);
// Ẽ vvᵀ of a pseudo-expectation.
Eigen::MatrixXd second_moment_matrix(const PseudoExpectation& pe);

struct DirectionResult {
  Eigen::VectorXd u_hat;
  std::string branch;  // "max" or "min"
  std::string reason;
  double sigma_sq = 0.0;
  std::optional<double> T_U, T_L;
  std::optional<double> moment_test;  // Ê⟨y,û_U⟩^{2s}
  std::optional<double> correlation;
  bool degenerate = false;
  int probes = 0, undecided = 0, iterations = 0;
  std::vector<ProbeRecord> trace_u, trace_l;
};

// Min over 64 seeded unit directions of Ê⟨z,v⟩²/2, floored at 1e-6.
double estimate_sigma_sq(const SampleSet& whitened, std::uint64_t seed);

// m holds Ê y^{⊗2s} and Ê y^{⊗2t} of points in isotropic position.
DirectionResult recover_direction(const EmpiricalMoments& m, const DirectionConfig& cfg, double sigma_sq,
                                  const std::optional<Eigen::VectorXd>& truth = std::nullopt);

}  // namespace psos
