#include <cmath>

#include "common.hpp"
#include "ebwave/harness.hpp"
#include "ebwave/lepski.hpp"

using namespace ebw;
using ebw::test::db8;

namespace {

// brute-force admissibility of the (m, j) test table
int brute_force(const std::vector<LevelRecord>& r, double lambda) {
  for (std::size_t a = 0; a < r.size(); ++a) {
    bool ok = true;
    for (std::size_t j = a + 1; j < r.size(); ++j) {
      const double s = r[a].norm_inv * r[a].norm_inv + r[j].norm_inv * r[j].norm_inv;
      ok = ok && std::pow(r[a].t_hat - r[j].t_hat, 2) <= lambda * lambda * s * s * r[j].rho_sq;
    }
    if (ok) return r[a].m;
  }
  return r.back().m;
}

}  // namespace

TEST_CASE("rho squared") {
  CHECK(rho_sq(4, 3.0, 1000) == doctest::Approx(64 * std::log(1000.0) / 1000));
  CHECK(rho_sq(4, 3.0, 1000) == doctest::Approx(0.44210).epsilon(1e-4));
  CHECK(rho_sq(0, 0.0, std::exp(1.0)) == doctest::Approx(std::exp(-1.0)));
  CHECK(rho_sq(5, 3.0, 1000) > rho_sq(4, 3.0, 1000));
}

TEST_CASE("lambda from sup norms") {
  const double C = 1.7;
  CHECK(compute_lambda(1, 1, 1, C, 1, 0, 0) == doctest::Approx(288 * C + 1));
  CHECK(compute_lambda(2.0, 0.0, 1, C, 1, 0, 0) == doctest::Approx(16 * C * std::pow(2.0, 1.5) + 1));
  const double base = compute_lambda(1, 1, 1, C, 2, 0.1, 0.1);
  CHECK(compute_lambda(1.1, 1, 1, C, 2, 0.1, 0.1) > base);
  CHECK(compute_lambda(1, 1.1, 1, C, 2, 0.1, 0.1) > base);
  CHECK(compute_lambda(1, 1, 1.1, C, 2, 0.1, 0.1) > base);
  CHECK(test::error_kind([&] { compute_lambda(1, 1, 1, C, 1, 0.5, 0.5); }) == ErrorKind::InvalidNu);
  CHECK(test::error_kind([&] { compute_lambda(1, 1, 1, C, 1, -0.1, 0.0); }) == ErrorKind::InvalidNu);
}

TEST_CASE("theory level grid") {
  std::map<int, double> g;
  for (int m = 0; m <= 30; ++m) g[m] = 0.0;
  const double n = std::ldexp(1.0, 20);
  const auto grid = LevelGrid::theory(n, g);
  const double ln = std::log(n);
  CHECK(std::ldexp(1.0, grid.m1) >= ln);
  CHECK(std::ldexp(1.0, grid.m1 - 1) < ln);
  CHECK(std::ldexp(1.0, grid.mn) <= n / (ln * ln));
  CHECK(std::ldexp(1.0, grid.mn + 1) > n / (ln * ln));
  std::map<int, double> big;
  for (int m = 0; m <= 30; ++m) big[m] = std::ldexp(1.0, 2 * m);
  CHECK(test::error_kind([&] { LevelGrid::theory(1000, big); }) == ErrorKind::ConfigError);
}

TEST_CASE("selection on synthetic traces") {
  std::vector<LevelRecord> one = {{3, 1.0, 1.0, 1.0, 0.1, false}};
  CHECK(select_from_records(one, 1.0).m_hat == 3);

  std::vector<LevelRecord> flat = {{2, 0.0, 1.0, 1.0, 0.1, false}, {3, 0.0, 1.0, 1.0, 0.1, false}, {4, 0.0, 1.0, 1.0, 0.1, false}};
  CHECK(select_from_records(flat, 1.0).m_hat == 2);

  std::vector<LevelRecord> r = {{3, 0.0, 1.0, 1.0, 0.1, false}, {4, 10.0, 1.0, 1.0, 0.1, false}, {5, 0.1, 1.0, 1.0, 0.1, false}};
  for (double lambda : {0.01, 0.5, 1.0, 3.0, 10.0}) CHECK(select_from_records(r, lambda).m_hat == brute_force(r, lambda));
}

TEST_CASE("oracle level") {
  std::map<int, double> zero;
  for (int m = 1; m <= 14; ++m) zero[m] = 0.0;
  CHECK(oracle_level(zero, std::ldexp(1.0, 15), 1.0) == 5);
  std::map<int, double> quad;
  for (int m = 1; m <= 20; ++m) quad[m] = std::ldexp(1.0, 2 * m);
  CHECK(oracle_level(quad, std::ldexp(1.0, 21), 1.0) - oracle_level(quad, std::ldexp(1.0, 16), 1.0) == 1);
  int prev = 0;
  for (int e = 8; e <= 24; ++e) {
    const int m0 = oracle_level(quad, std::ldexp(1.0, e), 1.0);
    CHECK(m0 >= prev);
    prev = m0;
  }
  CHECK(test::error_kind([] { oracle_level({}, 100, 1.0); }) == ErrorKind::EmptyGrid);
}

TEST_CASE("select_level on simulated data satisfies the definition") {
  const PosteriorSpec nn(FamilyModel::normal(1), PriorModel::normal(0, 1));
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const auto x = draw_sample(nn, 4096, rng);
    const auto grid = LevelGrid::practical(4096);
    const auto g = gamma_sq_table(nn.family, db8(), 0.5, grid.m1, grid.mn);
    for (double lambda : {kLambdaCal, 1e-3, 1e-8}) {
      const auto tr = select_level(nn.family, db8(), x, 0.5, grid, lambda, g);
      for (const auto& l : tr.levels) CHECK(l.norm_inv <= (1.0 / l.delta) * (1 + 1e-12));
      for (const auto& t : tr.tests)
        if (t.m == tr.m_hat) CHECK(t.pass);
      if (tr.m_hat > grid.m1) {
        bool below_fails = false;
        for (const auto& t : tr.tests)
          if (t.m == tr.m_hat - 1 && !t.pass) below_fails = true;
        CHECK(below_fails);
      }
      CHECK(tr.m_hat == brute_force(tr.levels, lambda));
    }
  }
}
