#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ebwave/families.hpp"

namespace ebw {

enum class PriorKind { Normal, Gamma, PointMass, Uniform };

// Prior density g(theta) with sampler.
class PriorModel {
 public:
  static PriorModel normal(double mu0, double sigma0);
  // shape a, rate
  static PriorModel gamma(double shape, double rate);
  static PriorModel point_mass(double theta0);
  static PriorModel uniform(double lo, double hi);

  PriorKind kind() const { return kind_; }
  double p1() const { return p1_; }
  double p2() const { return p2_; }

  double density(double theta) const;
  double sample(Rng& rng) const;
  double mean() const;
  double variance() const;
  // Support, truncated where the tail mass drops below 1e-12.
  std::pair<double, double> support() const;
  bool is_point_mass() const { return kind_ == PriorKind::PointMass; }

 private:
  PriorKind kind_ = PriorKind::Normal;
  double p1_ = 0.0;
  double p2_ = 1.0;
};

struct PosteriorSpec {
  FamilyModel family;
  PriorModel prior;

  // Throws ConfigError when the prior puts mass outside the family's theta-domain.
  PosteriorSpec(FamilyModel f, PriorModel g);
};

// p(x) = Int q(x|theta) g(theta) dtheta
double marginal_p(const PosteriorSpec& spec, double x);
// Psi(x) = Int theta q(x|theta) g(theta) dtheta
double psi_numerator(const PosteriorSpec& spec, double x);
// t(y) = Psi(y) / p(y)
double bayes_t(const PosteriorSpec& spec, double y);

// Closed-form posterior mean for conjugate pairs (and point masses).
std::optional<double> conjugate_t(const PosteriorSpec& spec, double y);

// bayes_t, additionally cross-checked against conjugate_t to 1e-8 when a
// closed form exists (QuadratureFailure on disagreement).
double bayes_t_checked(const PosteriorSpec& spec, double y);

// Normal likelihood with normal prior: p is N(mu0, sigma^2 + sigma0^2).
std::optional<double> conjugate_marginal(const PosteriorSpec& spec, double x);

}  // namespace ebw
