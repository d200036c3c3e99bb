#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ebw {

// Contiguous index range K_{m,y} of scaling-function translates kept in the
// local system around y at level m.
struct IndexSet {
  int m = 0;
  double y = 0.0;
  std::int64_t k_lo = 0;
  std::int64_t k_hi = -1;

  std::size_t size() const { return k_hi >= k_lo ? static_cast<std::size_t>(k_hi - k_lo + 1) : 0; }
  std::int64_t operator[](std::size_t i) const { return k_lo + static_cast<std::int64_t>(i); }
  bool contains(std::int64_t k) const { return k >= k_lo && k <= k_hi; }
};

// Compactly supported scaling function phi (with phi', phi'') tabulated on the
// dyadic grid M1 + j 2^-J. Immutable after construction.
class ScalingBasis {
 public:
  static constexpr int kOrders = 3;

  // Builds the scaling function of a named refinement filter ("db6".."db12").
  static ScalingBasis build(const std::string& wavelet_name, int tab_depth = 12);

  // Builds from an explicit filter h_0..h_L (sum sqrt(2)) with support [0, L].
  static ScalingBasis from_filter(std::string name, std::vector<double> filter,
                                  int vanishing_moments, int tab_depth);

  static ScalingBasis load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::string& name() const { return name_; }
  std::span<const double> filter() const { return filter_; }
  int support_lo() const { return m1_; }
  int support_hi() const { return m2_; }
  int width() const { return m2_ - m1_; }
  int vanishing_moments() const { return s_; }
  int depth() const { return depth_; }

  std::size_t grid_size() const { return table_[0].size(); }
  double grid_step() const { return step_; }
  double grid_point(std::size_t i) const { return m1_ + static_cast<double>(i) * step_; }
  std::span<const double> table(int order) const { return table_.at(order); }

  // phi^(order)(x): zero outside [M1, M2], linear interpolation inside.
  double eval(double x, int order = 0) const;

  // phi_{m,k}^(order)(x) = 2^{m/2} 2^{m*order} phi^(order)(2^m x - k).
  double phi_mk(int m, std::int64_t k, double x, int order = 0) const;

  // Int_{M1}^{z} phi, with Euler-Maclaurin corrected cumulative sums.
  double antiderivative(double z) const;

  // sum_k |phi(z - k)| maximised over a fine grid; the constant C_phi.
  double partition_abs_sup() const;
  double sup_abs(int order) const;

  IndexSet index_set(int m, double y) const;

  // Composite trapezoid over the tabulation: sum_i f(z_i, i) * step. Exact for
  // polynomial moments of phi below s and spectrally accurate for smooth
  // weights, since every integrand vanishes at both support ends.
  template <class F>
  double integrate_grid(F&& f) const {
    double sum = 0.0;
    const std::size_t n = grid_size();
    for (std::size_t i = 0; i < n; ++i) sum += f(grid_point(i), i);
    return sum * step_;
  }

 private:
  ScalingBasis() = default;
  void finish_tables();

  std::string name_;
  std::vector<double> filter_;
  int m1_ = 0;
  int m2_ = 0;
  int s_ = 0;
  int depth_ = 0;
  double step_ = 0.0;
  std::array<std::vector<double>, kOrders> table_;
  std::vector<double> cumulative_;
};

struct MomentReport {
  int max_order = 0;
  double max_residual = 0.0;
  // residual[order][z-index]
  std::vector<std::vector<double>> residual;
};

// |Int x^a sum_k phi(x-k) phi(z-k) dx - z^a| for a = 0..max_order on z_grid.
MomentReport check_vanishing_moments(const ScalingBasis& basis, int max_order,
                                     std::span<const double> z_grid);

// max over the grid of |phi^(p)(x) - sqrt2 2^p sum_k h_k phi^(p)(2x - k)|, the
// right side read from the depth J-1 subgrid.
double refinement_residual(const ScalingBasis& basis, int order);

// Int x^p phi(x) dx by tabulation quadrature.
double phi_moment(const ScalingBasis& basis, int p);

}  // namespace ebw
