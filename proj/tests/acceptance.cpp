// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "ebwave/errors.hpp"
#include "ebwave/estimator.hpp"
#include "ebwave/harness.hpp"
#include "ebwave/lower_bounds.hpp"

#ifndef EBWAVE_CLI
#define EBWAVE_CLI "ebwave"
#endif

using namespace ebw;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const ScalingBasis& basis() {
  static const ScalingBasis b = ScalingBasis::build("db8", 12);
  return b;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("error: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = out.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s criterion %d (%s): %s; %.1f s of %.0f s\n", pass ? "PASS" : "FAIL", id, title, out.detail.c_str(), secs,
              budget_s);
  std::fflush(stdout);
}

const PosteriorSpec& normal_normal() {
  static const PosteriorSpec s(FamilyModel::normal(1.0), PriorModel::normal(0.0, 1.0));
  return s;
}

Outcome basis_suite() {
  const auto rep = verify_suite("basis");
  std::string failed;
  for (const auto& c : rep.checks)
    if (!c.pass) failed += " [" + c.name + ": " + c.detail + "]";
  return {rep.pass(), fmt("%zu checks", rep.checks.size()) + (failed.empty() ? "" : ", failed:" + failed)};
}

Outcome u_equation() {
  struct Case {
    FamilyModel f;
    double y;
    std::vector<double> thetas;
    double tol;
  };
  const std::vector<Case> cases = {
      {FamilyModel::normal(1.0), 0.5, {-1, 0, 0.5, 1, 2}, 1e-6},
      {FamilyModel::double_exponential(1.0), 0.5, {-1, 0, 0.5, 1, 2}, 1e-5},
      {FamilyModel::weibull(2.0, 0.5, 200.0), 1.0, {0.5, 1, 2, 3, 5}, 1e-6},
      {FamilyModel::gamma(3.0, 0.5, 200.0), 1.0, {0.5, 1, 2, 3, 5}, 1e-6},
      {FamilyModel::uniform_scale(1.0, 40.0), 3.0, {1, 2, 3, 4, 5}, 1e-6},
  };
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    double worst = 0.0;
    for (int m : {2, 4, 6}) {
      const auto K = c.f.index_set(basis(), m, c.y);
      const auto q = static_cast<std::int64_t>(K.size() / 4);
      for (auto k : {K.k_lo + q, K.k_lo + 2 * q, K.k_hi - q})
        worst = std::max(worst, verify_u_equation(c.f, basis(), m, k, c.thetas));
    }
    ok = ok && worst <= c.tol;
    detail += fmt("%s %.1e<=%.0e ", c.f.name().c_str(), worst, c.tol);
  }
  return {ok, detail};
}

Outcome gamma_exponents() {
  // y = 40 keeps the level-3 window 2^-3 (K + supp phi) well away from the
  // origin; for Normal the reference point y = 0.5 is used
  struct Case {
    FamilyModel f;
    double y;
  };
  const std::vector<Case> cases = {{FamilyModel::normal(1.0), 0.5},
                                   {FamilyModel::double_exponential(1.0), 40.0},
                                   {FamilyModel::weibull(2.0), 40.0},
                                   {FamilyModel::gamma(3.0), 40.0},
                                   {FamilyModel::uniform_scale(1.0, 200.0), 40.0}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    std::vector<double> ms, lg;
    for (int m = 3; m <= 8; ++m) {
      ms.push_back(m);
      lg.push_back(std::log2(gamma_vector(c.f, basis(), m, c.y, 1).norm));
    }
    const double slope = fit_line(ms, lg).slope;
    const double want = c.f.alpha() / 2.0;
    ok = ok && std::abs(slope - want) <= 0.15;
    detail += fmt("%s(y=%g) %.3f vs %.1f ", c.f.name().c_str(), c.y, slope, want);
  }
  return {ok, detail};
}

Outcome unbiasedness() {
  const auto& spec = normal_normal();
  const auto& b = basis();
  const int m = 5, reps = 50;
  const std::size_t n = 100000;
  const double y = 0.0;
  const auto K = spec.family.index_set(b, m, y);
  const auto M = static_cast<Eigen::Index>(K.size());
  const auto truth = true_system(spec, b, m, K);
  const LevelU u(spec.family, b, m);

  Eigen::MatrixXd mean_B = Eigen::MatrixXd::Zero(M, M), sum_B2 = Eigen::MatrixXd::Zero(M, M);
  Eigen::VectorXd mean_c = Eigen::VectorXd::Zero(M), sum_c2 = Eigen::VectorXd::Zero(M);
  const double scale = std::ldexp(1.0, m);
  std::vector<double> phi(32), uk(32);
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = replication_stream(4, 0, 0, static_cast<std::size_t>(rep));
    const auto x = draw_sample(spec, n, rng);
    mean_B += build_B_hat(b, m, K, x);
    mean_c += build_c_hat(u, K, x);
    // per-sample second moments for the pooled standard errors
    for (double xi : x) {
      const auto lo = std::max<std::int64_t>(K.k_lo, static_cast<std::int64_t>(std::floor(scale * xi)) - b.support_hi());
      const auto hi = std::min<std::int64_t>(K.k_hi, static_cast<std::int64_t>(std::ceil(scale * xi)) - b.support_lo());
      const auto cnt = static_cast<std::size_t>(std::max<std::int64_t>(0, hi - lo + 1));
      for (std::size_t i = 0; i < cnt; ++i) {
        phi[i] = b.phi_mk(m, lo + static_cast<std::int64_t>(i), xi);
        uk[i] = u(lo + static_cast<std::int64_t>(i), xi);
      }
      for (std::size_t i = 0; i < cnt; ++i) {
        const auto a = static_cast<Eigen::Index>(lo - K.k_lo) + static_cast<Eigen::Index>(i);
        sum_c2(a) += uk[i] * uk[i];
        for (std::size_t j = 0; j < cnt; ++j) {
          const double v = phi[i] * phi[j];
          sum_B2(a, static_cast<Eigen::Index>(lo - K.k_lo) + static_cast<Eigen::Index>(j)) += v * v;
        }
      }
    }
  }
  mean_B /= reps;
  mean_c /= reps;
  const double N = static_cast<double>(n) * reps;

  // entries whose per-sample variance is zero must agree to rounding
  int worst_over = 0, zero_bad = 0;
  double worst_z = 0.0;
  auto check = [&](double est, double truth_v, double second) {
    const double var = std::max(0.0, second / N - est * est);
    if (var == 0.0) {
      if (std::abs(est - truth_v) > 1e-12) ++zero_bad;
      return;
    }
    const double z = std::abs(est - truth_v) / std::sqrt(var / N);
    worst_z = std::max(worst_z, z);
    if (z > 4.0) ++worst_over;
  };
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = 0; j < M; ++j) check(mean_B(i, j), truth.B(i, j), sum_B2(i, j));
    check(mean_c(i), truth.c(i), sum_c2(i));
  }
  return {worst_over == 0 && zero_bad == 0,
          fmt("M=%ld, %ld B entries + %ld c entries, max |z| = %.2f, %d over 4 SE, %d zero-variance mismatches",
              static_cast<long>(M), static_cast<long>(M * M), static_cast<long>(M), worst_z, worst_over, zero_bad)};
}

Outcome expansion() {
  const auto& spec = normal_normal();
  const double y = 0.5;
  const double py = *conjugate_marginal(spec, y);
  std::vector<double> ms, lg;
  std::string vals;
  for (int m = 3; m <= 8; ++m) {
    const auto K = spec.family.index_set(basis(), m, y);
    const auto ts = true_system(spec, basis(), m, K);
    Eigen::MatrixXd D = ts.B;
    D.diagonal().array() -= py;
    const double norm = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(D, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
    ms.push_back(m);
    lg.push_back(std::log2(norm));
    vals += fmt("%.3g ", norm);
  }
  const double slope = fit_line(ms, lg).slope;
  return {std::abs(slope + 1.0) <= 0.2, fmt("log2-slope %.3f (target -1 +- 0.2); norms m=3..8: %s", slope, vals.c_str())};
}

Outcome oracle_agreement() {
  const PosteriorSpec nn = normal_normal();
  const PosteriorSpec wg(FamilyModel::weibull(2.0, 0.1, 10.0), PriorModel::gamma(2.0, 1.0));
  double e1 = 0, e2 = 0;
  for (int i = 0; i < 20; ++i) {
    const double y = -3.0 + 0.3 * i;
    e1 = std::max(e1, std::abs(bayes_t(nn, y) - *conjugate_t(nn, y)));
    const double yw = 0.2 + 0.15 * i;
    e2 = std::max(e2, std::abs(bayes_t(wg, yw) - *conjugate_t(wg, yw)));
  }
  return {e1 <= 1e-8 && e2 <= 1e-8, fmt("normal-normal %.2e, weibull-gamma %.2e (tol 1e-8)", e1, e2)};
}

ExperimentConfig rate_config() {
  ExperimentConfig cfg;
  cfg.family = FamilyModel::normal(1.0);
  cfg.prior = PriorModel::normal(0.0, 1.0);
  cfg.y_points = {0.5};
  cfg.n_grid = {1u << 10, 1u << 12, 1u << 14, 1u << 16};
  cfg.replications = 200;
  cfg.policy.kind = PolicyKind::Oracle;
  cfg.policy.r = basis().vanishing_moments() - 1;
  cfg.seed = 7;
  return cfg;
}

ExperimentResult oracle_run;

Outcome convergence() {
  oracle_run = run_experiment(rate_config(), basis());
  const auto fit = fit_rate(oracle_run, 0.5);
  bool decreasing = !oracle_run.too_many_failures;
  std::string vals;
  for (std::size_t i = 0; i < oracle_run.rows.size(); ++i) {
    const auto& r = oracle_run.rows[i];
    if (i > 0 && !(r.mse < oracle_run.rows[i - 1].mse)) decreasing = false;
    vals += fmt("n=%zu m0=%d mse=%.3g+-%.2g ", r.n, r.m_oracle, r.mse, r.mse_stderr);
  }
  const bool in_band = fit.slope >= -1.0 && fit.slope <= -0.3;
  return {in_band && decreasing, fmt("slope %.3f +- %.3f (band [-1.0, -0.3]), strictly decreasing: %s; ", fit.slope,
                                     fit.slope_stderr, decreasing ? "yes" : "no") +
                                     vals};
}

Outcome adaptivity() {
  if (oracle_run.rows.empty()) oracle_run = run_experiment(rate_config(), basis());
  auto cfg = rate_config();
  cfg.policy = LevelPolicy{};
  cfg.policy.kind = PolicyKind::Lepski;
  cfg.policy.lambda_mode = LambdaMode::Calibrated;
  cfg.n_grid = {1u << 16};
  const auto lep = run_experiment(cfg, basis());
  const double mse_l = lep.rows[0].mse, mse_o = oracle_run.rows.back().mse;

  cfg.n_grid = {1u << 14};
  cfg.replications = 500;
  cfg.seed = 8;
  const auto lep14 = run_experiment(cfg, basis());
  LevelPolicy op;
  op.kind = PolicyKind::Oracle;
  op.r = rate_config().policy.r;
  const int m0 = PolicyRunner(cfg.family, basis(), op, 0.5, 1u << 14).oracle_level(1u << 14);
  const auto& mh = lep14.rows[0].m_hat;
  const auto over = std::count_if(mh.begin(), mh.end(), [&](int m) { return m > m0 + 2; });
  const double frac = mh.empty() ? 1.0 : static_cast<double>(over) / static_cast<double>(mh.size());
  const bool ok = !lep.too_many_failures && !lep14.too_many_failures && mse_l <= 4.0 * mse_o && frac <= 0.10;
  return {ok, fmt("n=2^16: mse lepski %.3g vs 4 x oracle %.3g (mean m_hat %.2f); n=2^14: m0=%d, fraction m_hat > m0+2 = "
                  "%.3f over %zu runs (mean m_hat %.2f)",
                  mse_l, 4.0 * mse_o, lep.rows[0].mean_mhat, m0, frac, mh.size(), lep14.rows[0].mean_mhat)};
}

Outcome lower_bound_exponents() {
  std::vector<double> ng;
  for (int i = 0; i <= 6; ++i) ng.push_back(std::pow(10.0, 3.0 + 0.5 * i));
  const auto tn = rate_trace(normal_normal(), 1.0, 0.5, ng);
  const PosteriorSpec uni(FamilyModel::uniform_scale(0.5, 10.0), PriorModel::uniform(1.0, 3.0));
  const auto tu = rate_trace(uni, 1.0, 0.5, ng);
  auto good = [](const RateTrace& t, double want) {
    return std::abs(t.exponent - want) <= 0.05 && t.kl_ordered && t.kl_band <= 3.0;
  };
  const double wn = -2.0 / 5.0, wu = -2.0 / 3.0;
  return {good(tn, wn) && good(tu, wu),
          fmt("normal %.4f vs %.4f (KL ordered %d, band %.3f); uniform %.4f vs %.4f (KL ordered %d, band %.3f)", tn.exponent,
              wn, tn.kl_ordered, tn.kl_band, tu.exponent, wu, tu.kl_ordered, tu.kl_band)};
}

std::string read_file(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const std::string dir = "acceptance_determinism";
  std::filesystem::create_directories(dir);
  {
    std::ofstream cfg(dir + "/config.json");
    cfg << R"({"family": {"family": "normal", "sigma": 1}, "prior": {"prior": "normal", "mu0": 0, "sigma0": 1},
  "y_points": [0.0, 0.5], "n_grid": [1024, 4096], "replications": 20,
  "policy": {"kind": "lepski", "lambda_mode": "calibrated"}, "seed": 10, "basis": "db8", "diagnostics": false})";
  }
  int rc = 0;
  for (const char* name : {"a.csv", "b.csv"}) {
    const std::string cmd = std::string(EBWAVE_CLI) + " simulate --config " + dir + "/config.json --out " + dir + "/" + name;
    rc |= std::system(cmd.c_str());
  }
  const auto a = read_file(dir + "/a.csv"), b = read_file(dir + "/b.csv");
  const bool same = rc == 0 && !a.empty() && a == b;
  return {same, fmt("exit status %d, %zu bytes each, byte-identical: %s", rc, a.size(), a == b ? "yes" : "no")};
}

}  // namespace

int main() {
  criterion(1, "basis invariants", 30, basis_suite);
  criterion(2, "u-equation oracle", 120, u_equation);
  criterion(3, "gamma exponents", 120, gamma_exponents);
  criterion(4, "unbiasedness of B_hat and c_hat", 120, unbiasedness);
  criterion(5, "expansion diagnostic", 60, expansion);
  criterion(6, "oracle agreement", 30, oracle_agreement);
  criterion(7, "convergence rate, oracle level", 600, convergence);
  criterion(8, "adaptivity, Lepski level", 900, adaptivity);
  criterion(9, "lower-bound exponents", 120, lower_bound_exponents);
  criterion(10, "determinism", 60, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
