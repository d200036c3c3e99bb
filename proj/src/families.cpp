#include "ebwave/families.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ebwave/errors.hpp"
#include "ebwave/quadrature.hpp"

namespace ebw {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tail lengths (in units of the decay scale) beyond which integrands are
// below double precision.
constexpr double kTailSpan = 60.0;

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

// Trapezoid over the tabulation grid for z in [M1, min(M2, z_cut)].
// `at(i)` is the integrand at grid point i, `at_point(z)` anywhere.
template <class G, class P>
double grid_integral(const ScalingBasis& basis, double z_cut, G&& at, P&& at_point) {
  const double lo = basis.support_lo();
  const double hi = std::min<double>(basis.support_hi(), z_cut);
  if (hi <= lo) return 0.0;
  const double h = basis.grid_step();
  const std::size_t n = basis.grid_size();
  const auto full = std::min<std::size_t>(static_cast<std::size_t>((hi - lo) / h), n - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i <= full; ++i) {
    const double w = (i == 0 || i == full) ? 0.5 : 1.0;
    sum += w * at(i);
  }
  sum *= h;
  if (full == 0) sum = 0.0;
  const double z_full = basis.grid_point(full);
  if (hi > z_full) sum += 0.5 * (hi - z_full) * (at(full) + at_point(hi));
  return sum;
}

}  // namespace

std::string family_name(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::NormalLocation: return "normal";
    case FamilyKind::DoubleExponential: return "double_exponential";
    case FamilyKind::Weibull: return "weibull";
    case FamilyKind::Gamma: return "gamma";
    case FamilyKind::UniformScale: return "uniform";
  }
  return "unknown";
}

FamilyModel FamilyModel::normal(double sigma) {
  if (!(sigma > 0)) throw Error(ErrorKind::ConfigError, "sigma must be positive");
  FamilyModel f;
  f.kind_ = FamilyKind::NormalLocation;
  f.sigma_ = sigma;
  return f;
}

FamilyModel FamilyModel::double_exponential(double sigma) {
  if (!(sigma > 0)) throw Error(ErrorKind::ConfigError, "sigma must be positive");
  FamilyModel f;
  f.kind_ = FamilyKind::DoubleExponential;
  f.sigma_ = sigma;
  return f;
}

FamilyModel FamilyModel::weibull(double b, double c1, double c2) {
  if (!(b >= 1)) throw Error(ErrorKind::ConfigError, "Weibull shape b must be >= 1");
  if (!(c1 > 0 && c2 > c1)) throw Error(ErrorKind::ConfigError, "need 0 < c1 < c2");
  FamilyModel f;
  f.kind_ = FamilyKind::Weibull;
  f.b_ = b;
  f.theta_lo_ = 0.0;
  f.c1_ = c1;
  f.c2_ = c2;
  return f;
}

FamilyModel FamilyModel::gamma(double beta, double c1, double c2) {
  if (!(beta >= 1)) throw Error(ErrorKind::ConfigError, "Gamma shape beta must be >= 1");
  if (!(c1 > 0 && c2 > c1)) throw Error(ErrorKind::ConfigError, "need 0 < c1 < c2");
  FamilyModel f;
  f.kind_ = FamilyKind::Gamma;
  f.beta_ = beta;
  f.theta_lo_ = 0.0;
  f.c1_ = c1;
  f.c2_ = c2;
  return f;
}

FamilyModel FamilyModel::uniform_scale(double theta_lo, double theta_hi) {
  if (!(theta_lo > 0 && theta_hi > theta_lo))
    throw Error(ErrorKind::ConfigError, "uniform family needs 0 < theta_lo < theta_hi");
  FamilyModel f;
  f.kind_ = FamilyKind::UniformScale;
  f.theta_lo_ = theta_lo;
  f.theta_hi_ = theta_hi;
  f.c1_ = 0.0;
  f.c2_ = theta_hi;
  return f;
}

double FamilyModel::alpha() const {
  switch (kind_) {
    case FamilyKind::NormalLocation:
    case FamilyKind::Weibull:
    case FamilyKind::Gamma: return 2.0;
    case FamilyKind::DoubleExponential:
    case FamilyKind::UniformScale: return 0.0;
  }
  return 0.0;
}

double FamilyModel::density(double x, double theta) const {
  switch (kind_) {
    case FamilyKind::NormalLocation: {
      const double z = (x - theta) / sigma_;
      return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sigma_);
    }
    case FamilyKind::DoubleExponential:
      return std::exp(-std::abs(x - theta) / sigma_) / (2.0 * sigma_);
    case FamilyKind::Weibull:
      if (x < 0) return 0.0;
      if (x == 0) return b_ == 1.0 ? theta : 0.0;
      return b_ * theta * std::pow(x, b_ - 1.0) * std::exp(-std::pow(x, b_) * theta);
    case FamilyKind::Gamma:
      if (x <= 0) return (x == 0 && beta_ == 1.0) ? theta : 0.0;
      return std::exp(beta_ * std::log(theta) + (beta_ - 1.0) * std::log(x) - x * theta - std::lgamma(beta_));
    case FamilyKind::UniformScale:
      return (x > 0 && x < theta) ? 1.0 / theta : 0.0;
  }
  return 0.0;
}

double FamilyModel::sample(double theta, Rng& rng) const {
  switch (kind_) {
    case FamilyKind::NormalLocation: {
      std::normal_distribution<double> nd(theta, sigma_);
      return nd(rng);
    }
    case FamilyKind::DoubleExponential: {
      std::exponential_distribution<double> ex(1.0 / sigma_);
      std::bernoulli_distribution coin(0.5);
      const double e = ex(rng);
      return coin(rng) ? theta + e : theta - e;
    }
    case FamilyKind::Weibull: {
      // X^b ~ Exp(theta)
      std::exponential_distribution<double> ex(theta);
      return std::pow(ex(rng), 1.0 / b_);
    }
    case FamilyKind::Gamma: {
      std::gamma_distribution<double> gd(beta_, 1.0 / theta);
      return gd(rng);
    }
    case FamilyKind::UniformScale: {
      std::uniform_real_distribution<double> ud(0.0, theta);
      return ud(rng);
    }
  }
  return 0.0;
}

double FamilyModel::mean(double theta) const {
  switch (kind_) {
    case FamilyKind::NormalLocation:
    case FamilyKind::DoubleExponential: return theta;
    case FamilyKind::Weibull: return std::pow(theta, -1.0 / b_) * std::tgamma(1.0 + 1.0 / b_);
    case FamilyKind::Gamma: return beta_ / theta;
    case FamilyKind::UniformScale: return theta / 2.0;
  }
  return 0.0;
}

double FamilyModel::variance(double theta) const {
  switch (kind_) {
    case FamilyKind::NormalLocation: return sigma_ * sigma_;
    case FamilyKind::DoubleExponential: return 2.0 * sigma_ * sigma_;
    case FamilyKind::Weibull: {
      const double g1 = std::tgamma(1.0 + 1.0 / b_);
      const double g2 = std::tgamma(1.0 + 2.0 / b_);
      return std::pow(theta, -2.0 / b_) * (g2 - g1 * g1);
    }
    case FamilyKind::Gamma: return beta_ / (theta * theta);
    case FamilyKind::UniformScale: return theta * theta / 12.0;
  }
  return 0.0;
}

bool FamilyModel::in_x_domain(double x) const {
  if (!std::isfinite(x)) return false;
  switch (kind_) {
    case FamilyKind::NormalLocation:
    case FamilyKind::DoubleExponential: return true;
    case FamilyKind::Weibull:
    case FamilyKind::Gamma: return x > 0;
    case FamilyKind::UniformScale: return x > 0 && x <= theta_hi_;
  }
  return false;
}

bool FamilyModel::in_theta_domain(double theta) const {
  if (!std::isfinite(theta)) return false;
  switch (kind_) {
    case FamilyKind::NormalLocation:
    case FamilyKind::DoubleExponential: return true;
    case FamilyKind::Weibull:
    case FamilyKind::Gamma: return theta > 0;
    case FamilyKind::UniformScale: return theta >= theta_lo_ && theta <= theta_hi_;
  }
  return false;
}

std::vector<double> FamilyModel::x_breaks(double theta) const {
  switch (kind_) {
    case FamilyKind::NormalLocation: return {};
    case FamilyKind::DoubleExponential: return {theta};
    case FamilyKind::Weibull:
    case FamilyKind::Gamma: return {0.0};
    case FamilyKind::UniformScale: return {0.0, theta};
  }
  return {};
}

std::pair<double, double> FamilyModel::x_range(double theta) const {
  switch (kind_) {
    case FamilyKind::NormalLocation: return {theta - 40.0 * sigma_, theta + 40.0 * sigma_};
    case FamilyKind::DoubleExponential: return {theta - kTailSpan * sigma_, theta + kTailSpan * sigma_};
    case FamilyKind::Weibull: return {0.0, std::pow(kTailSpan / theta, 1.0 / b_)};
    case FamilyKind::Gamma: return {0.0, (2.0 * beta_ + 2.0 * kTailSpan) / theta};
    case FamilyKind::UniformScale: return {0.0, theta};
  }
  return {0.0, 0.0};
}

void FamilyModel::check_estimation_point(double y) const {
  if (!std::isfinite(y)) throw Error(ErrorKind::DomainViolation, "non-finite y");
  if (kind_ == FamilyKind::UniformScale) {
    if (!(y > 0 && y < theta_hi_))
      throw Error(ErrorKind::DomainViolation, "uniform family needs 0 < y < theta_hi");
    return;
  }
  if (positive_support() && !(y >= c1_ && y <= c2_)) {
    throw Error(ErrorKind::DomainViolation, "y = " + std::to_string(y) + " outside declared [c1, c2] = [" +
                                                std::to_string(c1_) + ", " + std::to_string(c2_) + "]");
  }
}

IndexSet FamilyModel::index_set(const ScalingBasis& basis, int m, double y) const {
  IndexSet K = basis.index_set(m, y);
  if (positive_support()) K.k_lo = std::max<std::int64_t>(K.k_lo, -basis.support_lo());
  return K;
}

// ---------------------------------------------------------------- LevelU

LevelU::LevelU(const FamilyModel& family, const ScalingBasis& basis, int m)
    : family_(family),
      basis_(&basis),
      m_(m),
      scale_(std::ldexp(1.0, m)),
      inv_scale_(std::ldexp(1.0, -m)),
      root_(std::sqrt(std::ldexp(1.0, m))) {
  if (family_.kind() != FamilyKind::DoubleExponential) return;

  // F(z_i) = Int_{M1}^{z_i} phi(t) e^{-a (z_i - t)} dt, G(z_i) = Int_{z_i}^{M2} phi(t) e^{-a (t - z_i)} dt,
  // exact for the piecewise-linear interpolant of phi.
  decay_ = inv_scale_ / family_.sigma();
  const auto phi = basis.table(0);
  const std::size_t n = phi.size();
  const double h = basis.grid_step();
  const double a = decay_;
  const double E = std::exp(-a * h);
  const double w0 = -std::expm1(-a * h) / a;  // Int_0^h e^{-a(h-t)} dt
  const double w1 = (h - w0) / a;             // Int_0^h t e^{-a(h-t)} dt
  const double near = w1 / h;                 // weight of the endpoint the exponential peaks at
  const double far = w0 - w1 / h;
  fwd_.assign(n, 0.0);
  bwd_.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) fwd_[i + 1] = E * fwd_[i] + far * phi[i] + near * phi[i + 1];
  for (std::size_t i = n - 1; i-- > 0;) bwd_[i] = E * bwd_[i + 1] + near * phi[i] + far * phi[i + 1];
}

double LevelU::shift_grid(std::size_t i) const { return (fwd_[i] - bwd_[i]) / root_; }

double LevelU::shift_tail(double z) const {
  const double lo = basis_->support_lo();
  const double hi = basis_->support_hi();
  if (z >= hi) return fwd_.back() * std::exp(-decay_ * (z - hi)) / root_;
  return -bwd_.front() * std::exp(-decay_ * (lo - z)) / root_;
}

double LevelU::shift_part(std::int64_t k, double x) const {
  const double z = scale_ * x - static_cast<double>(k);
  switch (family_.kind()) {
    case FamilyKind::NormalLocation: {
      const double s = family_.sigma();
      return -s * s * root_ * scale_ * basis_->eval(z, 1);
    }
    case FamilyKind::DoubleExponential: {
      const double lo = basis_->support_lo();
      const double hi = basis_->support_hi();
      if (z <= lo || z >= hi) return shift_tail(z);
      const double pos = (z - lo) / basis_->grid_step();
      auto i = static_cast<std::size_t>(pos);
      if (i + 1 >= fwd_.size()) return shift_grid(fwd_.size() - 1);
      const double w = pos - static_cast<double>(i);
      return (1.0 - w) * shift_grid(i) + w * shift_grid(i + 1);
    }
    default: break;
  }
  throw Error(ErrorKind::UnsupportedFamily, "shift part exists only for location families");
}

double LevelU::operator()(std::int64_t k, double x) const {
  if (!family_.in_x_domain(x))
    throw Error(ErrorKind::DomainViolation, "x = " + std::to_string(x) + " outside the " + family_.name() + " x-domain");
  const double z = scale_ * x - static_cast<double>(k);
  const auto& B = *basis_;
  switch (family_.kind()) {
    case FamilyKind::NormalLocation:
    case FamilyKind::DoubleExponential:
      return x * root_ * B.eval(z, 0) + shift_part(k, x);
    case FamilyKind::Weibull: {
      const double d = B.eval(z, 1);
      if (d == 0.0) return 0.0;
      return root_ * scale_ * d / (family_.b() * std::pow(x, family_.b() - 1.0));
    }
    case FamilyKind::Gamma:
      return (family_.beta() - 1.0) / x * root_ * B.eval(z, 0) + root_ * scale_ * B.eval(z, 1);
    case FamilyKind::UniformScale:
      return B.antiderivative(z) / root_ + x * root_ * B.eval(z, 0);
  }
  return 0.0;
}

double LevelU::at_grid(std::int64_t k, std::size_t i) const {
  const auto& B = *basis_;
  const double z = B.grid_point(i);
  const double x = x_of(k, z);
  const double phi = B.table(0)[i];
  const double dphi = B.table(1)[i];
  switch (family_.kind()) {
    case FamilyKind::NormalLocation: {
      const double s = family_.sigma();
      return x * root_ * phi - s * s * root_ * scale_ * dphi;
    }
    case FamilyKind::DoubleExponential:
      return x * root_ * phi + shift_grid(i);
    case FamilyKind::Weibull:
      if (dphi == 0.0) return 0.0;
      if (x <= 0) throw Error(ErrorKind::DomainViolation, "Weibull u-function needs x > 0");
      return root_ * scale_ * dphi / (family_.b() * std::pow(x, family_.b() - 1.0));
    case FamilyKind::Gamma: {
      double first = 0.0;
      if (phi != 0.0 && family_.beta() != 1.0) {
        if (x <= 0) throw Error(ErrorKind::DomainViolation, "Gamma u-function needs x > 0");
        first = (family_.beta() - 1.0) / x * root_ * phi;
      }
      return first + root_ * scale_ * dphi;
    }
    case FamilyKind::UniformScale:
      return B.antiderivative(z) / root_ + x * root_ * phi;
  }
  return 0.0;
}

double LevelU::power_integral(std::int64_t k, int rho) const {
  if (rho < 1) throw Error(ErrorKind::ConfigError, "moment order must be >= 1");
  const auto& B = *basis_;
  const double lo = B.support_lo();
  const double hi = B.support_hi();
  const int p = 2 * rho;

  if (family_.positive_support()) {
    if (x_of(k, hi) <= 0) return 0.0;
    if (x_of(k, lo) < 0)
      throw Error(ErrorKind::DivergentIntegral,
                  "translate k = " + std::to_string(k) + " straddles x = 0; u is not defined there");
  }

  double x_cut = kInf;
  if (family_.kind() == FamilyKind::UniformScale) x_cut = family_.theta_hi();
  const double z_cut = std::isfinite(x_cut) ? scale_ * x_cut - static_cast<double>(k) : kInf;

  double total = grid_integral(
      B, z_cut, [&](std::size_t i) { return ipow(at_grid(k, i), p); },
      [&](double z) { return ipow((*this)(k, x_of(k, z)), p); });
  total *= inv_scale_;

  if (family_.kind() == FamilyKind::DoubleExponential) {
    // exponential tails of the shift part outside the support of phi
    const double right = fwd_.back() / root_;
    const double left = bwd_.front() / root_;
    total += (ipow(right, p) + ipow(left, p)) / (p * decay_) * inv_scale_;
  } else if (family_.kind() == FamilyKind::UniformScale) {
    const double level = B.antiderivative(hi) / root_;
    const double len = x_cut - x_of(k, hi);
    if (len > 0) {
      if (!std::isfinite(len)) throw Error(ErrorKind::DivergentIntegral, "uniform tail needs finite theta_hi");
      total += len * ipow(level, p);
    }
  }
  if (!std::isfinite(total)) throw Error(ErrorKind::DivergentIntegral, "non-finite u-power integral");
  return total;
}

double LevelU::sup_abs(std::int64_t k) const {
  const auto& B = *basis_;
  double x_cut = kInf;
  if (family_.kind() == FamilyKind::UniformScale) x_cut = family_.theta_hi();
  double best = 0.0;
  for (std::size_t i = 0; i < B.grid_size(); ++i) {
    const double x = x_of(k, B.grid_point(i));
    if (x > x_cut) break;
    if (family_.positive_support() && x <= 0) continue;
    best = std::max(best, std::abs(at_grid(k, i)));
  }
  return best;
}

double LevelU::integrate_weighted(std::int64_t k, const std::function<double(double)>& w, double x_cut,
                                  std::span<const double> breaks) const {
  const auto& B = *basis_;
  const double lo = B.support_lo();
  const double hi = B.support_hi();
  const double z_cut = std::isfinite(x_cut) ? scale_ * x_cut - static_cast<double>(k) : kInf;

  double total = grid_integral(
      B, z_cut, [&](std::size_t i) { return w(x_of(k, B.grid_point(i))) * at_grid(k, i); },
      [&](double z) {
        const double x = x_of(k, z);
        return w(x) * (*this)(k, x);
      });
  total *= inv_scale_;

  auto tail = [&](double a, double b, auto&& f) {
    if (!(b > a)) return 0.0;
    std::vector<double> pts{a};
    for (double t : breaks)
      if (t > a && t < b) pts.push_back(t);
    std::sort(pts.begin(), pts.end());
    pts.push_back(b);
    quad::Options opt;
    opt.abs_tol = 1e-13;
    opt.rel_tol = 1e-11;
    return quad::integrate_pieces(f, pts, opt).value;
  };

  if (family_.kind() == FamilyKind::DoubleExponential) {
    const double span = kTailSpan * family_.sigma();
    const double x_hi = x_of(k, hi);
    const double x_lo = x_of(k, lo);
    auto f = [&](double x) { return w(x) * shift_tail(scale_ * x - static_cast<double>(k)); };
    total += tail(x_lo - span, std::min(x_lo, x_cut), f);
    total += tail(x_hi, std::min(x_hi + span, x_cut), f);
  } else if (family_.kind() == FamilyKind::UniformScale) {
    const double level = B.antiderivative(hi) / root_;
    const double x_hi = x_of(k, hi);
    if (x_hi < x_cut) {
      if (!std::isfinite(x_cut)) throw Error(ErrorKind::DivergentIntegral, "uniform tail needs a finite cut");
      total += tail(x_hi, x_cut, [&](double x) { return w(x) * level; });
    }
  }
  return total;
}

double u_func(const FamilyModel& family, const ScalingBasis& basis, int m, std::int64_t k, double x) {
  return LevelU(family, basis, m)(k, x);
}

double verify_u_equation(const FamilyModel& family, const ScalingBasis& basis, int m, std::int64_t k,
                         std::span<const double> theta_grid) {
  LevelU u(family, basis, m);
  const double scale = std::ldexp(1.0, m);
  const double root = std::sqrt(scale);
  const auto phi = basis.table(0);
  double worst = 0.0;
  for (double theta : theta_grid) {
    if (!family.in_theta_domain(theta))
      throw Error(ErrorKind::DomainViolation, "theta outside the family domain");
    // the uniform cut is applied through x_cut, so use the left limit of q there
    auto q = [&](double x) {
      if (family.kind() == FamilyKind::UniformScale) return x > 0 ? 1.0 / theta : 0.0;
      return family.density(x, theta);
    };
    const double x_cut = family.kind() == FamilyKind::UniformScale ? theta : kInf;
    const auto breaks = family.x_breaks(theta);
    const double lhs = u.integrate_weighted(k, q, x_cut, breaks);

    const double z_cut = std::isfinite(x_cut) ? scale * x_cut - static_cast<double>(k) : kInf;
    auto x_of = [&](double z) { return (z + static_cast<double>(k)) / scale; };
    const double rhs =
        theta *
        grid_integral(
            basis, z_cut, [&](std::size_t i) { return q(x_of(basis.grid_point(i))) * root * phi[i]; },
            [&](double z) { return q(x_of(z)) * root * basis.eval(z, 0); }) /
        scale;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

GammaVector gamma_vector(const FamilyModel& family, const ScalingBasis& basis, int m, double y, int rho) {
  if (rho < 1 || rho > 4) throw Error(ErrorKind::ConfigError, "rho must be in {1,2,3,4}");
  family.check_estimation_point(y);
  GammaVector g;
  g.m = m;
  g.rho = rho;
  g.K = family.index_set(basis, m, y);
  LevelU u(family, basis, m);
  double sq = 0.0;
  g.entries.reserve(g.K.size());
  for (std::size_t j = 0; j < g.K.size(); ++j) {
    const double v = std::sqrt(u.power_integral(g.K[j], rho));
    g.entries.push_back(v);
    sq += v * v;
  }
  g.norm = std::sqrt(sq);
  return g;
}

double sup_norm_ratio(const FamilyModel& family, const ScalingBasis& basis, int m, std::int64_t k, double y) {
  const double gm = gamma_vector(family, basis, m, y, 1).norm;
  LevelU u(family, basis, m);
  return u.sup_abs(k) / (std::sqrt(std::ldexp(1.0, m)) * gm);
}

double sup_norm_check(const FamilyModel& family, const ScalingBasis& basis, int m, double y) {
  const auto g = gamma_vector(family, basis, m, y, 1);
  LevelU u(family, basis, m);
  double best = 0.0;
  for (std::size_t j = 0; j < g.K.size(); ++j) best = std::max(best, u.sup_abs(g.K[j]));
  return best / (std::sqrt(std::ldexp(1.0, m)) * g.norm);
}

}  // namespace ebw
