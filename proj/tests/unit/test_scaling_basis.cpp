#include <cmath>
#include <filesystem>
#include <random>

#include "common.hpp"
#include "ebwave/quadrature.hpp"

using namespace ebw;
using ebw::test::db8;

TEST_CASE("db8 has support width 15 and 8 vanishing moments") {
  CHECK(db8().width() == 15);
  CHECK(db8().vanishing_moments() == 8);
  CHECK(db8().depth() == 12);
}

TEST_CASE("phi integrates to one and the refinement equation holds on the grid") {
  const auto f = db8().table(0);
  CHECK(db8().integrate_grid([&](double, std::size_t i) { return f[i]; }) == doctest::Approx(1.0).epsilon(1e-6));
  for (int o = 0; o < 3; ++o) CHECK(refinement_residual(db8(), o) <= 1e-6);
}

TEST_CASE("partition of unity") {
  double sum = 0.0;
  for (int k = -20; k <= 20; ++k) sum += db8().eval(0.37 - k);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng);
    double s = 0.0;
    for (int k = -30; k <= 30; ++k) s += db8().eval(x - k);
    CHECK(std::abs(s - 1.0) <= 1e-6);
  }
}

TEST_CASE("scaled partition of unity at m = 4, y = 0.3") {
  double s = 0.0;
  for (std::int64_t k = -40; k <= 40; ++k) s += std::pow(2.0, -2.0) * db8().phi_mk(4, k, 0.3);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("moment reproduction for orders below s") {
  const std::vector<double> half{0.5};
  CHECK(check_vanishing_moments(db8(), 3, half).max_residual <= 1e-5);
  const std::vector<double> zero{0.0};
  CHECK(check_vanishing_moments(db8(), 1, zero).max_residual <= 1e-5);
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(0.05 + 0.1 * i);
  CHECK(check_vanishing_moments(db8(), 7, grid).max_residual <= 1e-5);
  // one past the limit the identity breaks
  const std::vector<double> z{0.37};
  CHECK(check_vanishing_moments(db8(), 8, z).residual.back()[0] > 1e-3);
}

TEST_CASE("compact support and continuity at the edges") {
  for (int o = 0; o < 3; ++o) {
    CHECK(db8().eval(db8().support_lo() - 5.0, o) == 0.0);
    CHECK(db8().eval(db8().support_hi() + 0.1, o) == 0.0);
  }
  CHECK(std::abs(db8().eval(db8().support_hi(), 1)) <= 1e-6);
}

TEST_CASE("evaluation reproduces table values on grid points") {
  const auto f = db8().table(0);
  for (std::size_t i : {std::size_t{17}, std::size_t{4096}, std::size_t{30001}})
    CHECK(db8().eval(db8().grid_point(i)) == f[i]);
}

TEST_CASE("phi_mk follows the dilation and chain rule") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2, 17);
  for (int i = 0; i < 20; ++i) {
    const double x = u(rng);
    CHECK(db8().phi_mk(0, 0, x) == db8().eval(x));
  }
  const double x = 1.1;
  CHECK(db8().phi_mk(3, 5, x) == doctest::Approx(std::pow(2.0, 1.5) * db8().eval(8 * x - 5)).epsilon(1e-14));
  CHECK(db8().phi_mk(3, 5, x, 1) == doctest::Approx(std::pow(2.0, 4.5) * db8().eval(8 * x - 5, 1)).epsilon(1e-14));
}

TEST_CASE("index set bounds and cardinality") {
  // db6: M1 = 0, M2 = 11, s = 6, so the pad is 66 around 2^3 * 1
  const auto b6 = ScalingBasis::build("db6", 10);
  REQUIRE(b6.support_lo() == 0);
  REQUIRE(b6.support_hi() == 11);
  const auto K = b6.index_set(3, 1.0);
  CHECK(K.k_lo == -69);
  CHECK(K.k_hi == 74);
  const auto nominal = static_cast<long>((1 + 2 * db8().vanishing_moments()) * db8().width() + 1);
  for (int m = 0; m <= 12; ++m)
    CHECK(std::abs(static_cast<long>(db8().index_set(m, 0.123 * m).size()) - nominal) <= 1);
}

TEST_CASE("unknown wavelet is rejected") {
  CHECK(test::error_kind([] { ScalingBasis::build("sym99", 12); }) == ErrorKind::UnknownWavelet);
}

TEST_CASE("tabulation cache round-trips") {
  const auto path = std::filesystem::temp_directory_path() / "ebwave_db8_cache.bin";
  db8().save(path);
  const auto b = ScalingBasis::load(path);
  CHECK(b.support_lo() == db8().support_lo());
  CHECK(b.vanishing_moments() == db8().vanishing_moments());
  for (int o = 0; o < 3; ++o) {
    const auto a = db8().table(o), c = b.table(o);
    REQUIRE(a.size() == c.size());
    CHECK(std::equal(a.begin(), a.end(), c.begin()));
  }
  std::filesystem::remove(path);
}
