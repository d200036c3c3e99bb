#include <CLI11.hpp>

#include <cstdio>

#include "ebwave/harness.hpp"

// Reproduces the frozen calibrated lambda on the Normal-Normal reference setting.
int main(int argc, char** argv) {
  CLI::App app{"Lepski lambda calibration on the Normal-Normal reference setting"};
  std::size_t n = 1 << 14;
  int reps = 100;
  std::uint64_t seed = 20240601;
  double y = 0.5, r = 7.0;
  app.add_option("--n", n);
  app.add_option("--reps", reps);
  app.add_option("--seed", seed);
  app.add_option("--y", y);
  app.add_option("--r", r);
  CLI11_PARSE(app, argc, argv);

  const auto basis = ebw::ScalingBasis::build("db8", 12);
  const ebw::PosteriorSpec spec(ebw::FamilyModel::normal(1.0), ebw::PriorModel::normal(0.0, 1.0));
  const auto cal = ebw::calibrate_lambda(spec, basis, y, n, reps, seed, r);
  std::vector<int> hist(32, 0);
  for (int m : cal.m_hat) ++hist[static_cast<std::size_t>(m)];
  std::printf("m0 = %d, lambda = %.6g, mean |m_hat - m0| = %.4f\n", cal.m0, cal.lambda, cal.mean_distance);
  for (std::size_t m = 0; m < hist.size(); ++m)
    if (hist[m]) std::printf("  m_hat = %zu: %d\n", m, hist[m]);
  return 0;
}
