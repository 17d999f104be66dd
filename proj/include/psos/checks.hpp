#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace psos {

struct CheckReport {
  std::string name;
  long instances_tested = 0;
  double worst_violation = 0.0;  // ≤ 0 means no violation
  double tolerance = 1e-9;
  bool pass = true;
  nlohmann::json details = nlohmann::json::object();

  void finish() { pass = worst_violation <= tolerance; }
};

nlohmann::json to_json(const CheckReport& r);

// (E A^s)^{1/s} / (E A^t)^{1/t} for A uniform on values.
double moment_ratio(const std::vector<double>& values, int s, int t);
// Same ratio for a standard normal.
double gaussian_moment_ratio(int s, int t);

// k^{-1/s} ≤ ratio ≤ 1 with 1e-9 slack; s ≤ t even.
CheckReport check_moment_ratio_sandwich(const std::vector<double>& values, int s, int t);
// Random value sets for every even s ≤ t ≤ t_max.
CheckReport check_moment_ratio_sweep(int trials, int t_max, std::uint64_t seed);

// binom(2t,2s)(2t−2s−1)!! between binom(t,s)(t/2)^{t−s} and binom(t,s)(et)^{t−s}, exact.
CheckReport check_binom_double_factorial(int t_max);

struct PowerTransferParams {
  std::vector<int> t_values = {2, 4, 6, 8, 10, 12};
  std::vector<double> gamma_lower = {1.01, 1.5, 2.0, 5.0};       // γ > 1
  std::vector<double> gamma_upper = {0.05, 0.5, 1.0, 3.0};       // γ > 0
  std::vector<double> M_values = {2.0, 4.0, 50.0};               // M ≥ 2
  std::vector<double> sigma_lower = {0.0, 0.05, 0.5, 0.99};      // 0 ≤ σ² < 1
  std::vector<double> Delta_values = {10.0, 20.0, 100.0};        // Δ ≥ 10
  std::vector<double> sigma_upper = {0.0, 0.01, 0.05, 0.099};    // 0 ≤ σ² < 0.1
  std::vector<double> gamma_main_upper = {0.9, 1.0, 2.0};        // γ ≥ 0.9
  int random_pairs = 50;
  std::uint64_t seed = 1;
};

// f(x) ≥ −1e-9 on a grid of x in [−50, 50] plus refined local minima.
CheckReport check_power_transfer_lemmas(int grid, const PowerTransferParams& params = {});

// Pointwise scalar inequalities on random admissible inputs.
CheckReport check_scalar_sos_inequalities(long trials, std::uint64_t seed);

struct DistinguisherRow {
  int k = 0, s = 0, t = 0;
  double discrete_min = 0.0;  // k^{1/t − 1/s}, the smallest discrete ratio
  double gaussian = 0.0;
  bool pass = false;
};

// s = smallest even integer ≥ log₂ k, t = smallest even t > s with Gaussian ratio < 1/2.
DistinguisherRow distinguisher(int k);
CheckReport check_distinguisher(const std::vector<int>& ks = {2, 4, 8, 16});

std::vector<CheckReport> run_all_checks(std::uint64_t seed = 1);

}  // namespace psos
