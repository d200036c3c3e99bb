#include <cmath>
#include <random>

#include "common.hpp"
#include "ebwave/families.hpp"
#include "ebwave/quadrature.hpp"

using namespace ebw;
using ebw::test::db8;

namespace {

double integrate_density(const FamilyModel& f, double theta) {
  auto [lo, hi] = f.x_range(theta);
  std::vector<double> pts{lo};
  for (double t : f.x_breaks(theta))
    if (t > lo && t < hi) pts.push_back(t);
  pts.push_back(hi);
  return quad::integrate_pieces([&](double x) { return f.density(x, theta); }, pts).value;
}

}  // namespace

TEST_CASE("densities integrate to one") {
  const std::vector<std::pair<FamilyModel, std::vector<double>>> cases = {
      {FamilyModel::normal(0.7), {-2, 0, 1, 3, 10}},
      {FamilyModel::double_exponential(1.3), {-2, 0, 1, 3, 10}},
      {FamilyModel::weibull(2.5), {0.2, 0.5, 1, 3, 8}},
      {FamilyModel::gamma(3.0), {0.2, 0.5, 1, 3, 8}},
      {FamilyModel::uniform_scale(1, 10), {1, 2, 4, 7, 10}},
  };
  for (const auto& [f, thetas] : cases)
    for (double th : thetas) CHECK(std::abs(integrate_density(f, th) - 1.0) <= 1e-8);
}

TEST_CASE("alpha table") {
  CHECK(FamilyModel::normal(1).alpha() == 2);
  CHECK(FamilyModel::double_exponential(1).alpha() == 0);
  CHECK(FamilyModel::weibull(2).alpha() == 2);
  CHECK(FamilyModel::gamma(2).alpha() == 2);
  CHECK(FamilyModel::uniform_scale(1, 2).alpha() == 0);
}

TEST_CASE("normal u splits into x phi plus the shift part -phi'") {
  const auto f = FamilyModel::normal(1.0);
  const LevelU u(f, db8(), 0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ud(0, 15);
  for (int i = 0; i < 20; ++i) {
    const double x = ud(rng);
    CHECK(u.shift_part(0, x) == doctest::Approx(-db8().eval(x, 1)).epsilon(1e-12));
    CHECK(u(0, x) == doctest::Approx(x * db8().eval(x) - db8().eval(x, 1)).epsilon(1e-12));
  }
}

TEST_CASE("weibull with b = 1 has an x-independent prefactor") {
  const auto f = FamilyModel::weibull(1.0);
  for (double x : {0.3, 0.7, 1.1})
    CHECK(u_func(f, db8(), 2, 1, x) == doctest::Approx(std::pow(2.0, 3.0) * db8().eval(4 * x - 1, 1)).epsilon(1e-12));
}

TEST_CASE("gamma with beta = 1 reduces to the exponential form") {
  const auto g = FamilyModel::gamma(1.0), w = FamilyModel::weibull(1.0);
  for (double x : {0.3, 0.7, 1.1, 2.9}) CHECK(u_func(g, db8(), 2, 2, x) == doctest::Approx(u_func(w, db8(), 2, 2, x)));
}

TEST_CASE("uniform u vanishes left of the support and is 2^{-m/2} right of it") {
  const auto f = FamilyModel::uniform_scale(1, 40);
  const int m = 3;
  const std::int64_t k = 8;
  const double left = (db8().support_lo() + k - 0.5) / 8.0, right = (db8().support_hi() + k + 0.5) / 8.0;
  CHECK(u_func(f, db8(), m, k, left) == 0.0);
  CHECK(u_func(f, db8(), m, k, right) == doctest::Approx(std::pow(2.0, -1.5)).epsilon(1e-6));
}

TEST_CASE("u-equation oracle, spec examples") {
  const std::vector<double> a{-1, 0, 2}, b{1, 2, 5}, c{0.5, 1, 3};
  CHECK(verify_u_equation(FamilyModel::normal(1), db8(), 2, 3, a) <= 1e-6);
  CHECK(verify_u_equation(FamilyModel::uniform_scale(1, 40), db8(), 3, 8, b) <= 1e-6);
  CHECK(verify_u_equation(FamilyModel::weibull(2, 0.1, 100), db8(), 2, 5, c) <= 1e-6);
  CHECK(verify_u_equation(FamilyModel::double_exponential(1), db8(), 2, 3, a) <= 1e-5);
  CHECK(verify_u_equation(FamilyModel::gamma(3, 0.1, 100), db8(), 4, 20, c) <= 1e-6);
}

TEST_CASE("normal shift part has gamma_k^2 = 2^{2m} sigma^4 |phi'|^2") {
  const double sigma = 1.5;
  const auto f = FamilyModel::normal(sigma);
  const auto d = db8().table(1);
  const double phi1_sq = db8().integrate_grid([&](double, std::size_t i) { return d[i] * d[i]; });
  for (int m : {1, 3}) {
    const LevelU u(f, db8(), m);
    const std::int64_t k = 4;
    const double s = std::ldexp(1.0, m);
    const double lo = (db8().support_lo() + k) / s, hi = (db8().support_hi() + k) / s;
    std::vector<double> pts;
    for (int j = 0; j <= 60; ++j) pts.push_back(lo + (hi - lo) * j / 60.0);
    const double g2 = quad::integrate_pieces([&](double x) { return std::pow(u.shift_part(k, x), 2); }, pts).value;
    CHECK(g2 == doctest::Approx(std::pow(2.0, 2 * m) * std::pow(sigma, 4) * phi1_sq).epsilon(1e-5));
  }
}

TEST_CASE("gamma vectors: nonnegative entries and norm consistency") {
  const auto g = gamma_vector(FamilyModel::gamma(3.0), db8(), 4, 5.0, 1);
  double sq = 0.0;
  for (double e : g.entries) {
    CHECK(e >= 0.0);
    sq += e * e;
  }
  CHECK(g.norm * g.norm == doctest::Approx(sq).epsilon(1e-12));
  CHECK(g.entries.size() == g.K.size());
}

TEST_CASE("gamma ratio tends to 2^{alpha/2}") {
  const auto n = FamilyModel::normal(1.0);
  CHECK(gamma_vector(n, db8(), 8, 0.5, 1).norm / gamma_vector(n, db8(), 7, 0.5, 1).norm == doctest::Approx(2.0).epsilon(0.05));
  const auto u = FamilyModel::uniform_scale(1.0, 200.0);
  CHECK(gamma_vector(u, db8(), 8, 40.0, 1).norm / gamma_vector(u, db8(), 7, 40.0, 1).norm == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("samplers match analytic moments within 4 standard errors") {
  const std::vector<std::pair<FamilyModel, double>> cases = {{FamilyModel::normal(0.8), 1.0},
                                                             {FamilyModel::double_exponential(1.2), -0.5},
                                                             {FamilyModel::weibull(2.0), 1.5},
                                                             {FamilyModel::gamma(3.0), 0.7},
                                                             {FamilyModel::uniform_scale(1, 10), 4.0}};
  Rng rng(99);
  for (const auto& [f, th] : cases) {
    const int N = 100000;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < N; ++i) {
      const double x = f.sample(th, rng);
      s1 += x;
      s2 += x * x;
    }
    const double mean = s1 / N;
    CHECK(std::abs(mean - f.mean(th)) <= 4 * std::sqrt(f.variance(th) / N));
    CHECK(std::abs(s2 / N - mean * mean - f.variance(th)) <= 4 * f.variance(th) * std::sqrt(8.0 / N));
  }
}

TEST_CASE("domain violations") {
  CHECK(test::error_kind([] { u_func(FamilyModel::weibull(2), db8(), 2, 1, -0.5); }) == ErrorKind::DomainViolation);
  CHECK(test::error_kind([] { FamilyModel::gamma(2, 0.5, 10).check_estimation_point(0.1); }) == ErrorKind::DomainViolation);
  CHECK(test::error_kind([] { gamma_vector(FamilyModel::normal(1), db8(), 2, 0.0, 5); }) == ErrorKind::ConfigError);
}

TEST_CASE("sup-norm ratio stays bounded for the normal family") {
  double lo = 1e300, hi = 0;
  for (int m = 2; m <= 8; ++m) {
    const double r = sup_norm_check(FamilyModel::normal(1), db8(), m, 0.5);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(hi / lo <= 3.0);
}
