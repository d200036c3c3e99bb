#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "ebwave/bayes_oracle.hpp"
#include "ebwave/families.hpp"
#include "ebwave/scaling_basis.hpp"

namespace ebw {

// Ridge size delta = multiplier * sqrt(2^m / n), or a fixed value when set.
struct DeltaPolicy {
  double multiplier = 1.0;
  double fixed = -1.0;  // used when >= 0

  double delta(int m, std::size_t n) const;
};

struct LocalSystem {
  int m = 0;
  double y = 0.0;
  IndexSet K;
  std::size_t n = 0;
  Eigen::MatrixXd B_hat;
  Eigen::VectorXd c_hat;
  double delta = 0.0;
  Eigen::VectorXd a_hat;
  // samples landing in 2^-m (K + supp phi)
  std::size_t near_count = 0;
  bool low_density = false;
};

struct EstimateResult {
  double t_hat = 0.0;
  LocalSystem system;
  double min_eigenvalue = 0.0;  // of B_hat + delta I
};

// B_hat_{jk} = n^-1 sum_l phi_{m,k}(X_l) phi_{m,j}(X_l), accumulated sparsely.
Eigen::MatrixXd build_B_hat(const ScalingBasis& basis, int m, const IndexSet& K, std::span<const double> data);

// c_hat_j = n^-1 sum_l u_{m,j}(X_l).
Eigen::VectorXd build_c_hat(const LevelU& u, const IndexSet& K, std::span<const double> data);
Eigen::VectorXd build_c_hat(const FamilyModel& family, const ScalingBasis& basis, int m, const IndexSet& K,
                            std::span<const double> data);

// (B_hat + delta I)^-1 c_hat by Cholesky; SingularSystem if delta = 0 and B_hat is singular.
Eigen::VectorXd regularized_solve(const Eigen::MatrixXd& B_hat, const Eigen::VectorXd& c_hat, double delta);

// sum_k a_k phi_{m,k}(y)
double eval_estimate(const ScalingBasis& basis, int m, const IndexSet& K, const Eigen::VectorXd& a, double y);

// Builds and solves the local system at level m. Requires n >= 2 and 2^m < n.
LocalSystem build_system(const FamilyModel& family, const ScalingBasis& basis, std::span<const double> data,
                         double y, int m, const DeltaPolicy& policy = {});
LocalSystem build_system(const LevelU& u, std::span<const double> data, double y, const DeltaPolicy& policy = {});

EstimateResult estimate(const FamilyModel& family, const ScalingBasis& basis, std::span<const double> data,
                        double y, int m, const DeltaPolicy& policy = {});

// Population B and c from the oracle p and Psi.
struct TrueSystem {
  IndexSet K;
  Eigen::MatrixXd B;
  Eigen::VectorXd c;
};

TrueSystem true_system(const PosteriorSpec& spec, const ScalingBasis& basis, int m, const IndexSet& K);

// t_m(y) from a = B^-1 c with the population system (no ridge).
double projection_estimate(const ScalingBasis& basis, const TrueSystem& sys, double y);

struct MomentMatrices {
  std::vector<Eigen::MatrixXd> U;  // U_0..U_h
  std::vector<Eigen::VectorXd> D;  // D_0..D_h
};

MomentMatrices moment_matrices(const ScalingBasis& basis, int m, double y, const IndexSet& K, int h_max);

// Radius 2^-m s (M2 - M1) of the neighbourhood the level-m system depends on.
double neighbourhood_radius(const ScalingBasis& basis, int m);

}  // namespace ebw
