#include "ebwave/estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "ebwave/errors.hpp"

namespace ebw {
namespace {

// Lattice step (in z = 2^m x units) for population integrals; a divisor of the
// tabulation step keeps every translate on the tabulation grid.
constexpr int kLatticeDepth = 8;

// k-range of translates phi(z - k) that are nonzero at z, clipped to K.
std::pair<std::int64_t, std::int64_t> active_range(const ScalingBasis& basis, const IndexSet& K, double z) {
  const auto lo = static_cast<std::int64_t>(std::floor(z - basis.support_hi())) + 1;
  const auto hi = static_cast<std::int64_t>(std::ceil(z - basis.support_lo())) - 1;
  return {std::max(lo, K.k_lo), std::min(hi, K.k_hi)};
}

bool compact_u(FamilyKind kind) {
  return kind == FamilyKind::NormalLocation || kind == FamilyKind::Weibull || kind == FamilyKind::Gamma;
}

std::size_t count_near(const ScalingBasis& basis, int m, const IndexSet& K, std::span<const double> data) {
  const double scale = std::ldexp(1.0, m);
  const double lo = static_cast<double>(K.k_lo) + basis.support_lo();
  const double hi = static_cast<double>(K.k_hi) + basis.support_hi();
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [&](double x) {
    const double z = scale * x;
    return z > lo && z < hi;
  }));
}

}  // namespace

double DeltaPolicy::delta(int m, std::size_t n) const {
  if (fixed >= 0) return fixed;
  if (n == 0) throw Error(ErrorKind::EmptyData, "no observations");
  return multiplier * std::sqrt(std::ldexp(1.0, m) / static_cast<double>(n));
}

Eigen::MatrixXd build_B_hat(const ScalingBasis& basis, int m, const IndexSet& K, std::span<const double> data) {
  if (data.empty()) throw Error(ErrorKind::EmptyData, "B_hat needs at least one observation");
  const auto M = static_cast<Eigen::Index>(K.size());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(M, M);
  const double scale = std::ldexp(1.0, m);
  const double root = std::sqrt(scale);
  std::vector<double> vals;
  for (double x : data) {
    const double z = scale * x;
    const auto [a, b] = active_range(basis, K, z);
    if (b < a) continue;
    vals.resize(static_cast<std::size_t>(b - a + 1));
    for (std::int64_t k = a; k <= b; ++k) vals[static_cast<std::size_t>(k - a)] = root * basis.eval(z - static_cast<double>(k));
    const auto off = static_cast<Eigen::Index>(a - K.k_lo);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const auto ii = off + static_cast<Eigen::Index>(i);
      for (std::size_t j = 0; j <= i; ++j) B(ii, off + static_cast<Eigen::Index>(j)) += vals[i] * vals[j];
    }
  }
  B /= static_cast<double>(data.size());
  B.triangularView<Eigen::StrictlyUpper>() = B.transpose().triangularView<Eigen::StrictlyUpper>();
  return B;
}

Eigen::VectorXd build_c_hat(const LevelU& u, const IndexSet& K, std::span<const double> data) {
  if (data.empty()) throw Error(ErrorKind::EmptyData, "c_hat needs at least one observation");
  const auto& family = u.family();
  const auto& basis = u.basis();
  const auto M = static_cast<Eigen::Index>(K.size());
  Eigen::VectorXd c = Eigen::VectorXd::Zero(M);
  const double scale = std::ldexp(1.0, u.level());
  const bool compact = compact_u(family.kind());
  for (double x : data) {
    if (!family.in_x_domain(x))
      throw Error(ErrorKind::DomainViolation, "observation " + std::to_string(x) + " outside the " + family.name() + " x-domain");
    std::int64_t a = K.k_lo, b = K.k_hi;
    if (compact) std::tie(a, b) = active_range(basis, K, scale * x);
    for (std::int64_t k = a; k <= b; ++k) c(static_cast<Eigen::Index>(k - K.k_lo)) += u(k, x);
  }
  c /= static_cast<double>(data.size());
  return c;
}

Eigen::VectorXd build_c_hat(const FamilyModel& family, const ScalingBasis& basis, int m, const IndexSet& K,
                            std::span<const double> data) {
  return build_c_hat(LevelU(family, basis, m), K, data);
}

Eigen::VectorXd regularized_solve(const Eigen::MatrixXd& B_hat, const Eigen::VectorXd& c_hat, double delta) {
  if (B_hat.rows() != B_hat.cols() || B_hat.rows() != c_hat.size())
    throw Error(ErrorKind::ConfigError, "system dimensions disagree");
  if (!(delta >= 0)) throw Error(ErrorKind::ConfigError, "delta must be nonnegative");
  Eigen::MatrixXd A = B_hat;
  A.diagonal().array() += delta;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success || (delta == 0 && llt.rcond() < 1e-13))
    throw Error(ErrorKind::SingularSystem, "B_hat + delta I is not positive definite");
  Eigen::VectorXd a = llt.solve(c_hat);
  // one step of iterative refinement keeps the residual at rounding level
  const Eigen::VectorXd r = c_hat - A * a;
  if (r.norm() > 1e-12 * c_hat.norm()) a += llt.solve(r);
  return a;
}

double eval_estimate(const ScalingBasis& basis, int m, const IndexSet& K, const Eigen::VectorXd& a, double y) {
  if (static_cast<std::size_t>(a.size()) != K.size())
    throw Error(ErrorKind::ConfigError, "coefficient vector length differs from |K|");
  const double scale = std::ldexp(1.0, m);
  const double z = scale * y;
  const auto [lo, hi] = active_range(basis, K, z);
  double t = 0.0;
  for (std::int64_t k = lo; k <= hi; ++k) t += a(static_cast<Eigen::Index>(k - K.k_lo)) * basis.eval(z - static_cast<double>(k));
  return std::sqrt(scale) * t;
}

LocalSystem build_system(const LevelU& u, std::span<const double> data, double y, const DeltaPolicy& policy) {
  const auto& family = u.family();
  const auto& basis = u.basis();
  const int m = u.level();
  const std::size_t n = data.size();
  if (n == 0) throw Error(ErrorKind::EmptyData, "no observations");
  if (n < 2) throw Error(ErrorKind::ConfigError, "estimation needs n >= 2");
  if (m < 0 || std::ldexp(1.0, m) >= static_cast<double>(n))
    throw Error(ErrorKind::ConfigError, "level m = " + std::to_string(m) + " needs 0 <= m and 2^m < n");
  family.check_estimation_point(y);

  LocalSystem sys;
  sys.m = m;
  sys.y = y;
  sys.n = n;
  sys.K = family.index_set(basis, m, y);
  sys.B_hat = build_B_hat(basis, m, sys.K, data);
  sys.c_hat = build_c_hat(u, sys.K, data);
  sys.delta = policy.delta(m, n);
  sys.near_count = count_near(basis, m, sys.K, data);
  sys.low_density = sys.near_count < 10 || sys.B_hat.trace() == 0.0;
  sys.a_hat = regularized_solve(sys.B_hat, sys.c_hat, sys.delta);
  return sys;
}

LocalSystem build_system(const FamilyModel& family, const ScalingBasis& basis, std::span<const double> data,
                         double y, int m, const DeltaPolicy& policy) {
  if (m < 0) throw Error(ErrorKind::ConfigError, "level must be nonnegative");
  return build_system(LevelU(family, basis, m), data, y, policy);
}

EstimateResult estimate(const FamilyModel& family, const ScalingBasis& basis, std::span<const double> data,
                        double y, int m, const DeltaPolicy& policy) {
  EstimateResult res;
  res.system = build_system(family, basis, data, y, m, policy);
  const auto& s = res.system;
  res.t_hat = eval_estimate(basis, m, s.K, s.a_hat, y);
  Eigen::MatrixXd A = s.B_hat;
  A.diagonal().array() += s.delta;
  res.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues()(0);
  return res;
}

TrueSystem true_system(const PosteriorSpec& spec, const ScalingBasis& basis, int m, const IndexSet& K) {
  if (basis.depth() < kLatticeDepth) throw Error(ErrorKind::ConfigError, "tabulation too coarse for the population lattice");
  const std::size_t stride = std::size_t{1} << (basis.depth() - kLatticeDepth);
  const std::size_t per_unit = std::size_t{1} << basis.depth();
  const double hz = std::ldexp(1.0, -kLatticeDepth);
  const double scale = std::ldexp(1.0, m);
  const double root = std::sqrt(scale);
  const auto phi = basis.table(0);
  const auto M = static_cast<Eigen::Index>(K.size());
  const int width = basis.width();

  // p and Psi on the lattice z_l = k_lo + M1 + l hz
  const double z0 = static_cast<double>(K.k_lo) + basis.support_lo();
  const std::size_t L = (K.size() - 1 + static_cast<std::size_t>(width)) << kLatticeDepth;
  std::vector<double> p(L + 1), psi(L + 1);
  for (std::size_t l = 0; l <= L; ++l) {
    const double x = (z0 + static_cast<double>(l) * hz) / scale;
    if (!spec.family.in_x_domain(x)) {
      p[l] = psi[l] = 0.0;
      continue;
    }
    const auto pc = conjugate_marginal(spec, x);
    p[l] = pc ? *pc : marginal_p(spec, x);
    const auto tc = conjugate_t(spec, x);
    psi[l] = tc ? *tc * p[l] : psi_numerator(spec, x);
  }

  TrueSystem sys;
  sys.K = K;
  sys.B = Eigen::MatrixXd::Zero(M, M);
  sys.c = Eigen::VectorXd::Zero(M);
  // translate k covers lattice indices [(k - k_lo) 2^8, (k - k_lo + width) 2^8]
  for (Eigen::Index a = 0; a < M; ++a) {
    const std::size_t la = static_cast<std::size_t>(a) << kLatticeDepth;
    double cs = 0.0;
    for (std::size_t i = 0; i < phi.size(); i += stride) cs += phi[i] * psi[la + i / stride];
    sys.c(a) = cs * hz / root;
    for (Eigen::Index b = a; b < std::min<Eigen::Index>(M, a + width); ++b) {
      // phi(z - k_a) phi(z - k_b): overlap starts where translate b begins
      const std::size_t shift = static_cast<std::size_t>(b - a) * per_unit;
      double s = 0.0;
      for (std::size_t i = shift; i < phi.size(); i += stride)
        s += phi[i] * phi[i - shift] * p[la + i / stride];
      sys.B(a, b) = sys.B(b, a) = s * hz;
    }
  }
  return sys;
}

double projection_estimate(const ScalingBasis& basis, const TrueSystem& sys, double y) {
  const auto M = sys.B.rows();
  // Jacobi scaling; translates where p vanishes carry no information and are dropped
  std::vector<Eigen::Index> keep;
  const double dmax = sys.B.diagonal().maxCoeff();
  for (Eigen::Index i = 0; i < M; ++i)
    if (sys.B(i, i) > 1e-14 * dmax) keep.push_back(i);
  const auto P = static_cast<Eigen::Index>(keep.size());
  if (P == 0) throw Error(ErrorKind::SingularSystem, "population system vanishes");
  Eigen::MatrixXd A(P, P);
  Eigen::VectorXd rhs(P), d(P);
  for (Eigen::Index i = 0; i < P; ++i) d(i) = 1.0 / std::sqrt(sys.B(keep[i], keep[i]));
  for (Eigen::Index i = 0; i < P; ++i) {
    rhs(i) = d(i) * sys.c(keep[i]);
    for (Eigen::Index j = 0; j < P; ++j) A(i, j) = d(i) * d(j) * sys.B(keep[i], keep[j]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "population system factorisation failed");
  const Eigen::VectorXd w = ldlt.solve(rhs);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(M);
  for (Eigen::Index i = 0; i < P; ++i) a(keep[i]) = d(i) * w(i);
  return eval_estimate(basis, sys.K.m, sys.K, a, y);
}

MomentMatrices moment_matrices(const ScalingBasis& basis, int m, double y, const IndexSet& K, int h_max) {
  if (h_max < 0 || h_max > basis.vanishing_moments() - 1)
    throw Error(ErrorKind::ConfigError, "h_max must lie in [0, s-1]");
  if (basis.depth() < kLatticeDepth) throw Error(ErrorKind::ConfigError, "tabulation too coarse");
  const std::size_t stride = std::size_t{1} << (basis.depth() - kLatticeDepth);
  const std::size_t per_unit = std::size_t{1} << basis.depth();
  const double hz = std::ldexp(1.0, -kLatticeDepth);
  const double shift_y = std::ldexp(y, m);
  const auto phi = basis.table(0);
  const auto M = static_cast<Eigen::Index>(K.size());
  const int width = basis.width();

  MomentMatrices out;
  for (int h = 0; h <= h_max; ++h) {
    out.U.push_back(Eigen::MatrixXd::Zero(M, M));
    out.D.push_back(Eigen::VectorXd::Zero(M));
  }
  std::vector<double> acc(static_cast<std::size_t>(h_max) + 1);
  // t = z + 2^m y - k runs over the tabulation; z = t - 2^m y + k
  for (Eigen::Index a = 0; a < M; ++a) {
    const double offset = static_cast<double>(K[static_cast<std::size_t>(a)]) - shift_y;
    for (Eigen::Index b = a; b < std::min<Eigen::Index>(M, a + width); ++b) {
      const std::size_t shift = static_cast<std::size_t>(b - a) * per_unit;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = shift; i < phi.size(); i += stride) {
        const double z = basis.grid_point(i) + offset;
        double w = phi[i] * phi[i - shift];
        for (double& v : acc) {
          v += w;
          w *= z;
        }
      }
      for (int h = 0; h <= h_max; ++h) out.U[h](a, b) = out.U[h](b, a) = acc[h] * hz;
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < phi.size(); i += stride) {
      const double z = basis.grid_point(i) + offset;
      double w = phi[i];
      for (double& v : acc) {
        v += w;
        w *= z;
      }
    }
    for (int h = 0; h <= h_max; ++h) out.D[h](a) = acc[h] * hz;
  }
  return out;
}

double neighbourhood_radius(const ScalingBasis& basis, int m) {
  return std::ldexp(static_cast<double>(basis.vanishing_moments() * basis.width()), -m);
}

}  // namespace ebw
