#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ebwave/estimator.hpp"

namespace ebw {

// rho_{m n}^2 = 2^m (1 + gamma_m^2) ln(n) / n
double rho_sq(int m, double gamma_m_sq, double n);

// lambda = 16 C_phi ||p||^{1/2} sqrt(M) D + 1 with the proof's constant D.
double compute_lambda(double p_sup, double psi_sup, double phi_sup, double C_phi, int M, double nu1, double nu2);

struct LevelGrid {
  int m1 = 0;
  int mn = -1;

  std::vector<int> levels() const;
  bool empty() const { return mn < m1; }

  // m1 = ceil(log2 ln n), mn = max{m : 2^m (gamma_m^2 + 1) <= n / ln^2 n};
  // ConfigError when mn < m1.
  static LevelGrid theory(double n, const std::map<int, double>& gamma_sq_by_m);
  // Desk-scale grid [0, m_cap] with m_cap = max{m : 2^m <= n / ln^2 n}.
  static LevelGrid practical(double n);
};

// gamma_m^2 at y for each level of the grid (or for every m in [lo, hi]).
std::map<int, double> gamma_sq_table(const FamilyModel& family, const ScalingBasis& basis, double y, int lo, int hi);

enum class LambdaMode { Theory, Calibrated };

// 10^-5.2, frozen from the Normal-Normal reference calibration (ebwave_calibrate,
// n = 2^14, y = 0.5, 100 replications, seed 20240601).
inline constexpr double kLambdaCal = 6.309573444801929e-06;

struct LevelRecord {
  int m = 0;
  double t_hat = 0.0;
  double norm_inv = 0.0;  // spectral norm of (B_hat + delta I)^-1
  double rho_sq = 0.0;
  double delta = 0.0;
  bool low_density = false;
};

struct PairTest {
  int m = 0;
  int j = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

struct SelectionTrace {
  std::vector<LevelRecord> levels;
  std::vector<PairTest> tests;
  int m_hat = 0;
  double t_hat = 0.0;
  double lambda = 0.0;
  LambdaMode mode = LambdaMode::Calibrated;
  std::vector<std::string> flags;
};

// The test table and the selection rule, separated from estimation so they
// can be exercised on synthetic traces.
SelectionTrace select_from_records(std::vector<LevelRecord> records, double lambda);

SelectionTrace select_level(const FamilyModel& family, const ScalingBasis& basis, std::span<const double> data,
                            double y, const LevelGrid& grid, double lambda,
                            const std::map<int, double>& gamma_sq_by_m);

// argmin_m n^-1 2^m (gamma_m^2 + 1) + 2^{-2 m r}; smallest m on ties.
int oracle_level(const std::map<int, double>& gamma_sq_by_m, double n, double r);

// Plug-in lambda of the theory mode: ||p||_inf from a histogram of the data
// with bin width 2 * 2^-m_top, ||Psi||_inf = ||p||_inf * theta_abs_max.
double theory_lambda(const ScalingBasis& basis, std::span<const double> data, int m_top, int M,
                     double theta_abs_max);

}  // namespace ebw
