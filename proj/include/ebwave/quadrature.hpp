#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "ebwave/errors.hpp"

namespace ebw::quad {

struct Options {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  unsigned max_depth = 13;
};

struct Result {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive Gauss-Kronrod 7/15 on a finite interval. Throws when the error
// estimate misses max(abs_tol, rel_tol * L1) at the depth limit.
template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
  if (a == b) return {};
  if (!(std::isfinite(a) && std::isfinite(b)))
    throw Error(ErrorKind::QuadratureFailure, "infinite integration limits");
  double err = 0.0, l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      [&f](double x) { return static_cast<double>(f(x)); }, a, b, opt.max_depth, opt.rel_tol, &err, &l1);
  if (!std::isfinite(value)) throw Error(ErrorKind::QuadratureFailure, "non-finite integrand");
  if (err > std::max(opt.abs_tol, opt.rel_tol * l1))
    throw Error(ErrorKind::QuadratureFailure, "no convergence on [" + std::to_string(a) + ", " + std::to_string(b) +
                                                  "], error estimate " + std::to_string(err));
  return {value, err};
}

// Integrates over consecutive panels [breaks[i], breaks[i+1]]; breaks must be
// sorted. Kinks and discontinuities of the integrand belong in `breaks`.
template <class F>
Result integrate_pieces(F&& f, std::span<const double> breaks, const Options& opt = {}) {
  Result out;
  if (breaks.size() < 2) return out;
  const auto pieces = static_cast<double>(breaks.size() - 1);
  Options sub = opt;
  sub.abs_tol = opt.abs_tol / pieces;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] <= breaks[i]) continue;
    auto r = integrate(f, breaks[i], breaks[i + 1], sub);
    out.value += r.value;
    out.error += r.error;
  }
  return out;
}

}  // namespace ebw::quad
