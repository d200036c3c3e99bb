#include "ebwave/lower_bounds.hpp"

#include <algorithm>
#include <cmath>

#include "ebwave/errors.hpp"
#include "ebwave/harness.hpp"
#include "ebwave/quadrature.hpp"

namespace ebw {
namespace {

quad::Options tight() {
  quad::Options opt;
  opt.abs_tol = 1e-14;
  opt.rel_tol = 1e-11;
  opt.max_depth = 15;
  return opt;
}

double p_at(const PosteriorSpec& spec, double x) {
  if (auto c = conjugate_marginal(spec, x)) return *c;
  return marginal_p(spec, x);
}

double psi_at(const PosteriorSpec& spec, double x) {
  if (auto t = conjugate_t(spec, x)) return *t * p_at(spec, x);
  return psi_numerator(spec, x);
}

}  // namespace

BumpKernel::BumpKernel(int q) : q_(q) {
  if (q < 1) throw Error(ErrorKind::ConfigError, "kernel order q must be >= 1");
  // z (1 - z^2)^q peaks at z = (2q + 1)^{-1/2}
  const double zs = 1.0 / std::sqrt(2.0 * q + 1.0);
  c_ = 1.0 / (zs * std::pow(1.0 - zs * zs, q));
}

double BumpKernel::operator()(double z) const {
  if (!(std::abs(z) < 1.0)) return 0.0;
  return c_ * z * std::pow(1.0 - z * z, q_);
}

double BumpKernel::derivative(double z) const {
  if (!(std::abs(z) < 1.0)) return 0.0;
  const double s = 1.0 - z * z;
  return c_ * std::pow(s, q_ - 1) * (s - 2.0 * q_ * z * z);
}

double BumpKernel::antiderivative(double z) const {
  if (!(std::abs(z) < 1.0)) return 0.0;
  return -c_ * std::pow(1.0 - z * z, q_ + 1) / (2.0 * (q_ + 1));
}

double BumpKernel::l2_sq() const {
  return quad::integrate([&](double z) { return (*this)(z) * (*this)(z); }, -1.0, 1.0, tight()).value;
}

LowerRates lower_rates(FamilyKind kind, double r) {
  switch (kind) {
    case FamilyKind::NormalLocation:
    case FamilyKind::Weibull:
    case FamilyKind::Gamma: return {r + 1.0, 1.0};
    case FamilyKind::DoubleExponential:
    case FamilyKind::UniformScale: return {r, 0.0};
  }
  return {r, 0.0};
}

double w_perturbation(const FamilyModel& family, const BumpKernel& kernel, double h, double y, double x) {
  if (!(h > 0)) throw Error(ErrorKind::ConfigError, "bandwidth h must be positive");
  const double z = (x - y) / h;
  switch (family.kind()) {
    case FamilyKind::NormalLocation: {
      const double s2 = family.sigma() * family.sigma();
      return x * kernel(z) + s2 / h * kernel.derivative(z);
    }
    case FamilyKind::DoubleExponential: {
      // x k(z) - h Int k(u) sign(x - y - h u) exp(-|x - y - h u| / sigma) du
      const double sig = family.sigma();
      auto f = [&](double u) {
        const double d = x - y - h * u;
        const double sg = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        return kernel(u) * sg * std::exp(-std::abs(d) / sig);
      };
      std::vector<double> pts{-1.0};
      if (z > -1.0 && z < 1.0) pts.push_back(z);
      pts.push_back(1.0);
      return x * kernel(z) - h * quad::integrate_pieces(f, pts, tight()).value;
    }
    case FamilyKind::Weibull:
    case FamilyKind::Gamma: {
      if (!(x > 0)) throw Error(ErrorKind::DomainViolation, "exponential-family w needs x > 0");
      // exponential-family form with f(x) = x^{e}: f'/f = e / x
      const double b = family.kind() == FamilyKind::Weibull ? family.b() : 1.0;
      const double e = family.kind() == FamilyKind::Weibull ? family.b() - 1.0 : family.beta() - 1.0;
      const double xb = std::pow(x, b - 1.0);
      return e / x / (b * xb) * kernel(z) - kernel.derivative(z) / (b * h * xb);
    }
    case FamilyKind::UniformScale:
      return x * kernel(z) - h * kernel.antiderivative(z);
  }
  throw Error(ErrorKind::UnsupportedFamily, "no closed-form w for this family");
}

double rho_r(const FamilyModel& family, const BumpKernel& kernel, double h, double y, int r) {
  if (r < 1 || r > 4) throw Error(ErrorKind::ConfigError, "rho_r supports 1 <= r <= 4");
  const double s = 1e-3 * h;
  auto w = [&](double x) { return w_perturbation(family, kernel, h, y, x); };
  // central stencils of second order for derivatives 1..4
  const double f0 = w(y), fp1 = w(y + s), fm1 = w(y - s), fp2 = w(y + 2 * s), fm2 = w(y - 2 * s);
  const double d[4] = {
      (fp1 - fm1) / (2 * s),
      (fp1 - 2 * f0 + fm1) / (s * s),
      (fp2 - 2 * fp1 + 2 * fm1 - fm2) / (2 * s * s * s),
      (fp2 - 4 * fp1 + 6 * f0 - 4 * fm1 + fm2) / (s * s * s * s),
  };
  double best = 0.0;
  for (int j = 0; j < r; ++j) best = std::max(best, std::abs(d[j]));
  if (best == 0.0) throw Error(ErrorKind::DegenerateFit, "all derivatives of w vanish at y");
  return 1.0 / best;
}

PerturbationPair::PerturbationPair(PosteriorSpec spec, BumpKernel kernel, double h, double y, double zeta)
    : spec_(std::move(spec)), kernel_(kernel), h_(h), y_(y), zeta_(zeta) {
  if (!(h > 0)) throw Error(ErrorKind::ConfigError, "bandwidth h must be positive");
  constexpr int kGrid = 2001;
  for (int i = 0; i < kGrid; ++i) {
    const double x = y - h + 2.0 * h * i / (kGrid - 1);
    if (p1(x) < 0)
      throw Error(ErrorKind::NegativeDensity, "perturbed marginal negative at x = " + std::to_string(x));
  }
}

double PerturbationPair::p0(double x) const { return p_at(spec_, x); }
double PerturbationPair::p1(double x) const { return p0(x) + zeta_ * kernel_((x - y_) / h_); }
double PerturbationPair::psi0(double x) const { return psi_at(spec_, x); }
double PerturbationPair::w(double x) const { return w_perturbation(spec_.family, kernel_, h_, y_, x); }
double PerturbationPair::psi1(double x) const { return psi0(x) + zeta_ * w(x); }

KlResult kl_bound(const PerturbationPair& pair, double n) {
  KlResult out;
  if (pair.zeta() == 0.0) return out;
  const double y = pair.y();
  const double h = pair.h();
  const auto& k = pair.kernel();
  auto exact = [&](double x) {
    const double p0 = pair.p0(x);
    const double d = pair.zeta() * k((x - y) / h);
    if (p0 <= 0) throw Error(ErrorKind::NegativeDensity, "p0 vanishes inside the perturbation window");
    if (p0 + d < 0) throw Error(ErrorKind::NegativeDensity, "p1 negative inside the perturbation window");
    return std::log1p(d / p0) * (p0 + d);
  };
  auto bound = [&](double x) {
    const double kv = k((x - y) / h);
    return kv * kv / pair.p0(x);
  };
  // both integrands vanish outside |x - y| < h
  std::vector<double> pts{y - h, y, y + h};
  out.exact = n * quad::integrate_pieces(exact, pts, tight()).value;
  out.bound = n * pair.zeta() * pair.zeta() * quad::integrate_pieces(bound, pts, tight()).value;
  return out;
}

double two_point_gap(const PerturbationPair& pair) {
  const double y = pair.y();
  const double p0 = pair.p0(y);
  const double k0 = pair.kernel()(0.0);
  const double p1 = p0 + pair.zeta() * k0;
  if (!(p0 > 0 && p1 > 0)) throw Error(ErrorKind::VanishingMarginal, "p0(y) or p1(y) not positive");
  // t1 - t0 = zeta (w p0 - Psi0 k(0)) / (p0 p1), free of cancellation
  return pair.zeta() * std::abs(pair.w(y) * p0 - pair.psi0(y) * k0) / (p0 * p1);
}

double a3_margin(const PosteriorSpec& spec, const BumpKernel& kernel, double h, double y) {
  constexpr int kGrid = 2001;
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) lo = std::min(lo, p_at(spec, y - h + 2.0 * h * i / (kGrid - 1)));
  return lo / (2.0 * kernel.sup_norm());
}

RateTrace rate_trace(const PosteriorSpec& spec, double r, double y, const std::vector<double>& n_grid) {
  if (!(r > 0)) throw Error(ErrorKind::ConfigError, "r must be positive");
  if (n_grid.size() < 2) throw Error(ErrorKind::ConfigError, "rate trace needs at least two n values");
  RateTrace tr;
  tr.r = r;
  const auto rates = lower_rates(spec.family.kind(), r);
  tr.r1 = rates.r1;
  tr.r2 = rates.r2;
  const double rm = std::max(r, rates.r1);
  tr.expected_exponent = -(2.0 * rm - 2.0 * rates.r2) / (2.0 * rm + 1.0);
  const BumpKernel kernel(static_cast<int>(std::ceil(r)) + 1);
  auto bandwidth = [&](double n) { return std::pow(n, -1.0 / (2.0 * rm + 1.0)); };

  const double n_min = *std::min_element(n_grid.begin(), n_grid.end());
  const double h_max = bandwidth(n_min);
  const double Cp = a3_margin(spec, kernel, h_max, y);
  if (!(Cp > 0)) throw Error(ErrorKind::NegativeDensity, "A3 fails: p0 vanishes near y");

  // largest zeta0 <= C_p whose perturbations all pass the A3 grid check
  double zeta0 = Cp;
  for (int attempt = 0;; ++attempt) {
    try {
      for (double n : n_grid) {
        const double h = bandwidth(n);
        PerturbationPair(spec, kernel, h, y, zeta0 * std::pow(h, rm));
      }
      break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NegativeDensity || attempt > 40) throw;
      zeta0 *= 0.5;
    }
  }
  tr.zeta0 = zeta0;

  std::vector<double> ln, lg;
  for (double n : n_grid) {
    RateRow row;
    row.n = n;
    row.h = bandwidth(n);
    row.zeta = zeta0 * std::pow(row.h, rm);
    const PerturbationPair pair(spec, kernel, row.h, y, row.zeta);
    const auto kl = kl_bound(pair, n);
    row.kl_exact = kl.exact;
    row.kl_bound = kl.bound;
    row.gap = two_point_gap(pair);
    row.gap_sq = row.gap * row.gap;
    if (!(kl.exact <= kl.bound)) tr.kl_ordered = false;
    tr.rows.push_back(row);
    ln.push_back(std::log(n));
    lg.push_back(std::log(row.gap_sq));
  }
  tr.exponent = fit_line(ln, lg).slope;
  double bmax = 0.0, bmin = std::numeric_limits<double>::infinity();
  for (const auto& row : tr.rows) {
    bmax = std::max(bmax, row.kl_bound);
    bmin = std::min(bmin, row.kl_bound);
  }
  tr.kl_band = bmax / bmin;
  return tr;
}

}  // namespace ebw
