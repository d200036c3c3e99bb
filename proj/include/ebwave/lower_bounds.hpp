#pragma once

#include <vector>

#include "ebwave/bayes_oracle.hpp"

namespace ebw {

// k(z) = c_q z (1 - z^2)^q on (-1, 1), scaled to sup |k| = 1.
class BumpKernel {
 public:
  explicit BumpKernel(int q);

  int q() const { return q_; }
  double c() const { return c_; }
  double operator()(double z) const;
  double derivative(double z) const;
  // K(z) = Int_{-1}^z k
  double antiderivative(double z) const;
  double sup_norm() const { return 1.0; }
  // Int k^2
  double l2_sq() const;

 private:
  int q_;
  double c_;
};

// Smoothness exponents r1, r2 for each family's closed forms.
struct LowerRates {
  double r1 = 0.0;
  double r2 = 0.0;
};
LowerRates lower_rates(FamilyKind kind, double r);

// w_{h,y}(x) = Int theta q(x|theta) psi_{h,y}(theta) dtheta where psi solves
// Int q(x|theta) psi(theta) dtheta = k((x - y)/h).
double w_perturbation(const FamilyModel& family, const BumpKernel& kernel, double h, double y, double x);

// rho_r(h) by central finite differences of w at y with step 1e-3 h.
double rho_r(const FamilyModel& family, const BumpKernel& kernel, double h, double y, int r);

class PerturbationPair {
 public:
  // Throws NegativeDensity if p1 dips below zero on a dense grid around y.
  PerturbationPair(PosteriorSpec spec, BumpKernel kernel, double h, double y, double zeta);

  double h() const { return h_; }
  double y() const { return y_; }
  double zeta() const { return zeta_; }
  const BumpKernel& kernel() const { return kernel_; }
  const PosteriorSpec& spec() const { return spec_; }

  double p0(double x) const;
  double p1(double x) const;
  double psi0(double x) const;
  double psi1(double x) const;
  double w(double x) const;

 private:
  PosteriorSpec spec_;
  BumpKernel kernel_;
  double h_;
  double y_;
  double zeta_;
};

struct KlResult {
  double exact = 0.0;
  double bound = 0.0;
};

// KL(p1^n || p0^n) = n Int log(p1/p0) p1 and its bound n zeta^2 Int k^2((x-y)/h) / p0.
KlResult kl_bound(const PerturbationPair& pair, double n);

// |t1(y) - t0(y)|
double two_point_gap(const PerturbationPair& pair);

// C_p = min over |x - y| <= h of p0(x) / (2 ||k||_inf).
double a3_margin(const PosteriorSpec& spec, const BumpKernel& kernel, double h, double y);

struct RateRow {
  double n = 0.0;
  double h = 0.0;
  double zeta = 0.0;
  double kl_exact = 0.0;
  double kl_bound = 0.0;
  double gap = 0.0;
  double gap_sq = 0.0;
};

struct RateTrace {
  std::vector<RateRow> rows;
  double r = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double zeta0 = 0.0;
  double exponent = 0.0;         // fitted slope of log gap^2 against log n
  double expected_exponent = 0.0;  // -(2 max(r, r1) - 2 r2) / (2 max(r, r1) + 1)
  double kl_band = 0.0;          // max / min of the KL bound over the grid
  bool kl_ordered = true;        // exact <= bound on every row
};

// h = n^{-1/(2 max(r, r1) + 1)}, zeta = zeta0 h^{max(r, r1)}, kernel q = ceil(r) + 1.
RateTrace rate_trace(const PosteriorSpec& spec, double r, double y, const std::vector<double>& n_grid);

}  // namespace ebw
