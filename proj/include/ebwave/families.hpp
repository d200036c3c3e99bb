#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ebwave/scaling_basis.hpp"

namespace ebw {

enum class FamilyKind { NormalLocation, DoubleExponential, Weibull, Gamma, UniformScale };

std::string family_name(FamilyKind kind);

using Rng = std::mt19937_64;

// Conditional density q(x | theta) together with its sampler and u-functions.
class FamilyModel {
 public:
  static FamilyModel normal(double sigma);
  static FamilyModel double_exponential(double sigma);
  // y restricted to [c1, c2] for the positive-support families.
  static FamilyModel weibull(double b, double c1 = 0.1, double c2 = 100.0);
  static FamilyModel gamma(double beta, double c1 = 0.1, double c2 = 100.0);
  // theta ~ prior on [theta_lo, theta_hi]; x | theta ~ U(0, theta).
  static FamilyModel uniform_scale(double theta_lo, double theta_hi);

  FamilyKind kind() const { return kind_; }
  std::string name() const { return family_name(kind_); }
  double sigma() const { return sigma_; }
  double b() const { return b_; }
  double beta() const { return beta_; }
  double theta_lo() const { return theta_lo_; }
  double theta_hi() const { return theta_hi_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }

  // growth exponent of gamma_m^2 ~ 2^{alpha m}
  double alpha() const;
  bool is_location() const {
    return kind_ == FamilyKind::NormalLocation || kind_ == FamilyKind::DoubleExponential;
  }
  bool positive_support() const { return !is_location(); }

  double density(double x, double theta) const;
  double sample(double theta, Rng& rng) const;
  double mean(double theta) const;
  double variance(double theta) const;

  bool in_x_domain(double x) const;
  bool in_theta_domain(double theta) const;
  // Points where q(.|theta) is not smooth (support ends, kinks).
  std::vector<double> x_breaks(double theta) const;
  // Interval holding all but a negligible tail of q(.|theta).
  std::pair<double, double> x_range(double theta) const;

  // Throws DomainViolation when y lies outside the family's estimation range.
  void check_estimation_point(double y) const;

  // Index set K_{m,y}, clipped for positive-support families to translates
  // whose support lies in x > 0 (u_{m,k} solves the moment equation only there).
  IndexSet index_set(const ScalingBasis& basis, int m, double y) const;

 private:
  FamilyKind kind_ = FamilyKind::NormalLocation;
  double sigma_ = 1.0;
  double b_ = 1.0;
  double beta_ = 1.0;
  double theta_lo_ = -std::numeric_limits<double>::infinity();
  double theta_hi_ = std::numeric_limits<double>::infinity();
  double c1_ = -std::numeric_limits<double>::infinity();
  double c2_ = std::numeric_limits<double>::infinity();
};

// u_{m,k} for every k at one level m: Int q(x|theta) u_{m,k}(x) dx equals
// theta Int q(x|theta) phi_{m,k}(x) dx for all theta. For the location
// families u = x phi_{m,k} + shift, where `shift` is the closed form solving
// Int q u = Int (theta - x) q phi_{m,k}.
class LevelU {
 public:
  LevelU(const FamilyModel& family, const ScalingBasis& basis, int m);

  int level() const { return m_; }
  const FamilyModel& family() const { return family_; }
  const ScalingBasis& basis() const { return *basis_; }

  double operator()(std::int64_t k, double x) const;
  // The location-family closed form (x phi_{m,k} removed).
  double shift_part(std::int64_t k, double x) const;
  // u_{m,k} at x = 2^-m (z_i + k), z_i the i-th tabulation point.
  double at_grid(std::int64_t k, std::size_t i) const;

  // Int u_{m,k}^{2 rho} dx.
  double power_integral(std::int64_t k, int rho) const;
  // sup_x |u_{m,k}(x)| over the tabulation grid (plus tails).
  double sup_abs(std::int64_t k) const;

  // Int_{x < x_cut} w(x) u_{m,k}(x) dx for a weight that is smooth apart
  // from the listed break points.
  double integrate_weighted(std::int64_t k, const std::function<double(double)>& w, double x_cut,
                            std::span<const double> breaks = {}) const;

 private:
  double x_of(std::int64_t k, double z) const { return (z + static_cast<double>(k)) * inv_scale_; }
  double shift_grid(std::size_t i) const;
  double shift_tail(double z) const;

  FamilyModel family_;
  const ScalingBasis* basis_;
  int m_;
  double scale_;      // 2^m
  double inv_scale_;  // 2^-m
  double root_;       // 2^{m/2}
  // double-exponential shift: U(z) = 2^{-m/2} (F(z) - G(z)) on the grid
  double decay_ = 0.0;
  std::vector<double> fwd_, bwd_;
};

// Single evaluation of u_{m,k}(x).
double u_func(const FamilyModel& family, const ScalingBasis& basis, int m, std::int64_t k, double x);

// max over theta_grid of |Int q u_{m,k} - theta Int q phi_{m,k}|.
double verify_u_equation(const FamilyModel& family, const ScalingBasis& basis, int m, std::int64_t k,
                         std::span<const double> theta_grid);

struct GammaVector {
  int m = 0;
  int rho = 1;
  IndexSet K;
  std::vector<double> entries;
  double norm = 0.0;
};

GammaVector gamma_vector(const FamilyModel& family, const ScalingBasis& basis, int m, double y, int rho);

// ||u_{m,k}||_inf / (2^{m/2} gamma_m) for one k, and the max over K_{m,y}.
double sup_norm_ratio(const FamilyModel& family, const ScalingBasis& basis, int m, std::int64_t k, double y);
double sup_norm_check(const FamilyModel& family, const ScalingBasis& basis, int m, double y);

}  // namespace ebw
