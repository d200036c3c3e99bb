#include "ebwave/bayes_oracle.hpp"

#include <algorithm>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>

#include "ebwave/errors.hpp"
#include "ebwave/quadrature.hpp"

namespace ebw {
namespace {

constexpr double kTailMass = 1e-13;

quad::Options oracle_options() {
  quad::Options opt;
  opt.abs_tol = 1e-13;
  opt.rel_tol = 1e-11;
  opt.max_depth = 15;
  return opt;
}

// Int f(theta) q(x|theta) g(theta) dtheta over the truncated prior support,
// with the kinks of q in theta as break points.
template <class F>
double theta_integral(const PosteriorSpec& spec, double x, F&& weight) {
  const auto& fam = spec.family;
  const auto& prior = spec.prior;
  if (prior.is_point_mass()) {
    const double t0 = prior.p1();
    return weight(t0) * fam.density(x, t0);
  }
  auto [lo, hi] = prior.support();
  if (fam.kind() == FamilyKind::UniformScale) lo = std::max(lo, x);  // q(x|theta) = 0 for theta <= x
  if (!(hi > lo)) return 0.0;
  std::vector<double> pts{lo};
  if (fam.kind() == FamilyKind::DoubleExponential && x > lo && x < hi) pts.push_back(x);
  if (fam.kind() == FamilyKind::NormalLocation) {
    // concentrate panels where the likelihood lives
    for (double d : {-8.0, 8.0}) {
      const double t = x + d * fam.sigma();
      if (t > lo && t < hi) pts.push_back(t);
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.push_back(hi);
  auto f = [&](double th) { return weight(th) * fam.density(x, th) * prior.density(th); };
  return quad::integrate_pieces(f, pts, oracle_options()).value;
}

}  // namespace

PriorModel PriorModel::normal(double mu0, double sigma0) {
  if (!(sigma0 > 0)) throw Error(ErrorKind::ConfigError, "sigma0 must be positive");
  PriorModel g;
  g.kind_ = PriorKind::Normal;
  g.p1_ = mu0;
  g.p2_ = sigma0;
  return g;
}

PriorModel PriorModel::gamma(double shape, double rate) {
  if (!(shape > 0 && rate > 0)) throw Error(ErrorKind::ConfigError, "gamma prior needs shape, rate > 0");
  PriorModel g;
  g.kind_ = PriorKind::Gamma;
  g.p1_ = shape;
  g.p2_ = rate;
  return g;
}

PriorModel PriorModel::point_mass(double theta0) {
  PriorModel g;
  g.kind_ = PriorKind::PointMass;
  g.p1_ = theta0;
  g.p2_ = 0.0;
  return g;
}

PriorModel PriorModel::uniform(double lo, double hi) {
  if (!(hi > lo)) throw Error(ErrorKind::ConfigError, "uniform prior needs lo < hi");
  PriorModel g;
  g.kind_ = PriorKind::Uniform;
  g.p1_ = lo;
  g.p2_ = hi;
  return g;
}

double PriorModel::density(double theta) const {
  switch (kind_) {
    case PriorKind::Normal: {
      const double z = (theta - p1_) / p2_;
      return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * p2_);
    }
    case PriorKind::Gamma:
      if (theta <= 0) return 0.0;
      return std::exp(p1_ * std::log(p2_) + (p1_ - 1.0) * std::log(theta) - p2_ * theta - std::lgamma(p1_));
    case PriorKind::PointMass: return 0.0;  // no density; handled explicitly
    case PriorKind::Uniform: return (theta >= p1_ && theta <= p2_) ? 1.0 / (p2_ - p1_) : 0.0;
  }
  return 0.0;
}

double PriorModel::sample(Rng& rng) const {
  switch (kind_) {
    case PriorKind::Normal: {
      std::normal_distribution<double> nd(p1_, p2_);
      return nd(rng);
    }
    case PriorKind::Gamma: {
      std::gamma_distribution<double> gd(p1_, 1.0 / p2_);
      return gd(rng);
    }
    case PriorKind::PointMass: return p1_;
    case PriorKind::Uniform: {
      std::uniform_real_distribution<double> ud(p1_, p2_);
      return ud(rng);
    }
  }
  return 0.0;
}

double PriorModel::mean() const {
  switch (kind_) {
    case PriorKind::Normal: return p1_;
    case PriorKind::Gamma: return p1_ / p2_;
    case PriorKind::PointMass: return p1_;
    case PriorKind::Uniform: return 0.5 * (p1_ + p2_);
  }
  return 0.0;
}

double PriorModel::variance() const {
  switch (kind_) {
    case PriorKind::Normal: return p2_ * p2_;
    case PriorKind::Gamma: return p1_ / (p2_ * p2_);
    case PriorKind::PointMass: return 0.0;
    case PriorKind::Uniform: return (p2_ - p1_) * (p2_ - p1_) / 12.0;
  }
  return 0.0;
}

std::pair<double, double> PriorModel::support() const {
  switch (kind_) {
    case PriorKind::Normal: {
      const double z = -boost::math::quantile(boost::math::normal_distribution<double>(), kTailMass);
      return {p1_ - z * p2_, p1_ + z * p2_};
    }
    case PriorKind::Gamma: {
      boost::math::gamma_distribution<double> gd(p1_, 1.0 / p2_);
      const double lo = p1_ >= 1.0 ? boost::math::quantile(gd, kTailMass) : 0.0;
      return {lo, boost::math::quantile(boost::math::complement(gd, kTailMass))};
    }
    case PriorKind::PointMass: return {p1_, p1_};
    case PriorKind::Uniform: return {p1_, p2_};
  }
  return {0.0, 0.0};
}

PosteriorSpec::PosteriorSpec(FamilyModel f, PriorModel g) : family(std::move(f)), prior(std::move(g)) {
  const auto [lo, hi] = prior.support();
  bool ok = true;
  switch (family.kind()) {
    case FamilyKind::NormalLocation:
    case FamilyKind::DoubleExponential: break;
    case FamilyKind::Weibull:
    case FamilyKind::Gamma:
      ok = prior.is_point_mass() ? prior.p1() > 0
                                 : (prior.kind() == PriorKind::Gamma ||
                                    (prior.kind() == PriorKind::Uniform && lo > 0));
      break;
    case FamilyKind::UniformScale:
      ok = lo >= family.theta_lo() && hi <= family.theta_hi() && lo > 0;
      break;
  }
  if (!ok)
    throw Error(ErrorKind::ConfigError, "prior support is not contained in the " + family.name() + " theta-domain");
}

double marginal_p(const PosteriorSpec& spec, double x) {
  return theta_integral(spec, x, [](double) { return 1.0; });
}

double psi_numerator(const PosteriorSpec& spec, double x) {
  return theta_integral(spec, x, [](double th) { return th; });
}

double bayes_t(const PosteriorSpec& spec, double y) {
  const double p = marginal_p(spec, y);
  if (!(p > 1e-12)) throw Error(ErrorKind::VanishingMarginal, "p(y) = " + std::to_string(p) + " at y = " + std::to_string(y));
  return psi_numerator(spec, y) / p;
}

std::optional<double> conjugate_t(const PosteriorSpec& spec, double y) {
  const auto& f = spec.family;
  const auto& g = spec.prior;
  if (g.is_point_mass()) return g.p1();
  if (f.kind() == FamilyKind::NormalLocation && g.kind() == PriorKind::Normal) {
    const double s2 = f.sigma() * f.sigma();
    const double s02 = g.p2() * g.p2();
    return (s02 * y + s2 * g.p1()) / (s02 + s2);
  }
  if (g.kind() == PriorKind::Gamma && y > 0) {
    // posterior Gamma(a + 1, rate + y^b) and Gamma(a + beta, rate + y)
    if (f.kind() == FamilyKind::Weibull) return (g.p1() + 1.0) / (g.p2() + std::pow(y, f.b()));
    if (f.kind() == FamilyKind::Gamma) return (g.p1() + f.beta()) / (g.p2() + y);
  }
  return std::nullopt;
}

std::optional<double> conjugate_marginal(const PosteriorSpec& spec, double x) {
  const auto& f = spec.family;
  const auto& g = spec.prior;
  if (f.kind() == FamilyKind::NormalLocation && g.kind() == PriorKind::Normal) {
    const double var = f.sigma() * f.sigma() + g.p2() * g.p2();
    const double z = x - g.p1();
    return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
  }
  if (g.is_point_mass()) return f.density(x, g.p1());
  return std::nullopt;
}

double bayes_t_checked(const PosteriorSpec& spec, double y) {
  const double t = bayes_t(spec, y);
  if (auto closed = conjugate_t(spec, y); closed && std::abs(*closed - t) > 1e-8) {
    throw Error(ErrorKind::QuadratureFailure, "posterior mean quadrature " + std::to_string(t) +
                                                  " disagrees with closed form " + std::to_string(*closed));
  }
  return t;
}

}  // namespace ebw
