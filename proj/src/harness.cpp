#include "ebwave/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "ebwave/errors.hpp"

namespace ebw {
namespace {

std::uint64_t mix64(std::uint64_t z) {
  // splitmix64 finaliser
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

// Runs body(i) for i in [0, count) on `threads` workers; results are written
// into per-index slots by the caller, so the order of completion is irrelevant.
template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 3) throw Error(ErrorKind::DegenerateFit, "a line fit needs at least three points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw Error(ErrorKind::DegenerateFit, "non-finite point");
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0)) throw Error(ErrorKind::DegenerateFit, "abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    rss += e * e;
  }
  f.slope_stderr = n > 2 ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
  return f;
}

std::string LevelPolicy::label() const {
  switch (kind) {
    case PolicyKind::Fixed: return "fixed:" + std::to_string(m);
    case PolicyKind::Oracle: return "oracle:" + fmt(r);
    case PolicyKind::Lepski:
      return std::string("lepski:") + (lambda_mode == LambdaMode::Theory ? "theory:" : "calibrated:") + fmt(lambda_mult);
  }
  return "unknown";
}

Rng replication_stream(std::uint64_t seed, std::size_t y_index, std::size_t n_index, std::size_t rep) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ mix64(0x1000 + y_index));
  h = mix64(h ^ mix64(0x2000000 + n_index));
  h = mix64(h ^ mix64(0x300000000ULL + rep));
  return Rng(h);
}

std::vector<double> draw_sample(const PosteriorSpec& spec, std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = spec.family.sample(spec.prior.sample(rng), rng);
  return x;
}

PolicyRunner::PolicyRunner(const FamilyModel& family, const ScalingBasis& basis, const LevelPolicy& policy,
                           double y, std::size_t n_max)
    : family_(&family), basis_(&basis), policy_(policy), y_(y) {
  if (policy_.kind == PolicyKind::Fixed) return;
  const int top = LevelGrid::practical(static_cast<double>(n_max)).mn;
  gamma_sq_ = gamma_sq_table(family, basis, y, 0, top);
}

LevelGrid PolicyRunner::grid(std::size_t n) const {
  const double nd = static_cast<double>(n);
  if (policy_.kind == PolicyKind::Lepski && policy_.lambda_mode == LambdaMode::Theory)
    return LevelGrid::theory(nd, gamma_sq_);
  return LevelGrid::practical(nd);
}

int PolicyRunner::oracle_level(std::size_t n) const {
  const auto g = grid(n);
  std::map<int, double> sub;
  for (int m : g.levels()) {
    const auto it = gamma_sq_.find(m);
    if (it == gamma_sq_.end()) throw Error(ErrorKind::ConfigError, "gamma table does not cover level " + std::to_string(m));
    sub[m] = it->second;
  }
  return ebw::oracle_level(sub, static_cast<double>(n), policy_.r);
}

double PolicyRunner::lambda(std::span<const double> data, std::size_t n) const {
  if (policy_.lambda_mode == LambdaMode::Calibrated) return kLambdaCal * policy_.lambda_mult;
  const auto g = grid(n);
  const auto M = static_cast<int>(basis_->index_set(0, 0.0).size());
  return policy_.lambda_mult * theory_lambda(*basis_, data, g.mn, M, policy_.theta_abs_max);
}

SelectionTrace PolicyRunner::trace(std::span<const double> data) const {
  const std::size_t n = data.size();
  auto tr = select_level(*family_, *basis_, data, y_, grid(n), lambda(data, n), gamma_sq_);
  tr.mode = policy_.lambda_mode;
  return tr;
}

PolicyRunner::Outcome PolicyRunner::run(std::span<const double> data) const {
  Outcome out;
  if (policy_.kind == PolicyKind::Lepski) {
    const auto tr = trace(data);
    out.t_hat = tr.t_hat;
    out.m = tr.m_hat;
    out.low_density = std::find(tr.flags.begin(), tr.flags.end(), "LowDensity") != tr.flags.end();
    return out;
  }
  out.m = policy_.kind == PolicyKind::Fixed ? policy_.m : oracle_level(data.size());
  DeltaPolicy dp;
  dp.multiplier = policy_.delta_mult;
  const auto sys = build_system(*family_, *basis_, data, y_, out.m, dp);
  out.t_hat = eval_estimate(*basis_, out.m, sys.K, sys.a_hat, y_);
  out.low_density = sys.low_density;
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ScalingBasis& basis) {
  if (cfg.replications < 1) throw Error(ErrorKind::ConfigError, "replications must be >= 1");
  if (cfg.y_points.empty() || cfg.n_grid.empty()) throw Error(ErrorKind::ConfigError, "y_points and n_grid must be nonempty");
  for (std::size_t i = 1; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] <= cfg.n_grid[i - 1]) throw Error(ErrorKind::ConfigError, "n_grid must be strictly increasing");
  const PosteriorSpec spec(cfg.family, cfg.prior);
  LevelPolicy policy = cfg.policy;
  if (policy.theta_abs_max == 0.0) {
    const auto [lo, hi] = cfg.prior.support();
    policy.theta_abs_max = std::max(std::abs(lo), std::abs(hi));
  }

  ExperimentResult result;
  for (std::size_t yi = 0; yi < cfg.y_points.size(); ++yi) {
    const double y = cfg.y_points[yi];
    const double t_true = bayes_t_checked(spec, y);
    const PolicyRunner runner(cfg.family, basis, policy, y, cfg.n_grid.back());
    // the oracle level also serves as the reference m0 for the Lepski policy
    LevelPolicy ref = policy;
    ref.kind = PolicyKind::Oracle;
    ref.lambda_mode = LambdaMode::Calibrated;
    const PolicyRunner oracle(cfg.family, basis, ref, y, cfg.n_grid.back());

    for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
      const std::size_t n = cfg.n_grid[ni];
      ResultRow row;
      row.y = y;
      row.n = n;
      row.policy = policy.label();
      row.t_true = t_true;
      if (policy.kind != PolicyKind::Fixed) row.m_oracle = oracle.oracle_level(n);

      const auto R = static_cast<std::size_t>(cfg.replications);
      std::vector<PolicyRunner::Outcome> outcome(R);
      std::vector<std::string> failure(R);
      parallel_for(R, cfg.threads, [&](std::size_t rep) {
        try {
          Rng rng = replication_stream(cfg.seed, yi, ni, rep);
          const auto x = draw_sample(spec, n, rng);
          outcome[rep] = runner.run(x);
        } catch (const Error& e) {
          failure[rep] = e.what();
        }
      });

      std::vector<double> sq, mh;
      for (std::size_t rep = 0; rep < R; ++rep) {
        if (!failure[rep].empty()) {
          ++row.reps_failed;
          row.errors.push_back(failure[rep]);
          continue;
        }
        ++row.reps_ok;
        const double e = outcome[rep].t_hat - t_true;
        sq.push_back(e * e);
        row.t_hat.push_back(outcome[rep].t_hat);
        row.m_hat.push_back(outcome[rep].m);
        mh.push_back(outcome[rep].m);
      }
      if (row.reps_failed * 100 > cfg.replications) result.too_many_failures = true;
      row.mse = mean_of(sq);
      row.mse_stderr = sq.empty() ? 0.0 : std::sqrt(sample_var(sq) / static_cast<double>(sq.size()));
      row.var_mc = sample_var(row.t_hat);
      row.mean_mhat = mean_of(mh);
      row.sd_mhat = std::sqrt(sample_var(mh));

      if (cfg.diagnostics && policy.kind != PolicyKind::Lepski) {
        const int m = policy.kind == PolicyKind::Fixed ? policy.m : row.m_oracle;
        const auto sys = true_system(spec, basis, m, cfg.family.index_set(basis, m, y));
        const double b = projection_estimate(basis, sys, y) - t_true;
        row.bias_sq = b * b;
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto basis = ScalingBasis::build(cfg.basis, cfg.basis_depth);
  return run_experiment(cfg, basis);
}

void write_csv(const ExperimentResult& result, std::ostream& out) {
  out << "y,n,policy,reps_ok,reps_failed,mse,mse_stderr,bias_sq,var_mc,mean_mhat,sd_mhat\n";
  for (const auto& r : result.rows) {
    out << fmt(r.y) << ',' << r.n << ',' << r.policy << ',' << r.reps_ok << ',' << r.reps_failed << ',' << fmt(r.mse)
        << ',' << fmt(r.mse_stderr) << ',' << fmt(r.bias_sq) << ',' << fmt(r.var_mc) << ',' << fmt(r.mean_mhat) << ','
        << fmt(r.sd_mhat) << '\n';
  }
}

LineFit fit_rate(const ExperimentResult& result, double y) {
  std::vector<double> ln, lm;
  for (const auto& r : result.rows) {
    if (r.y != y) continue;
    if (!(r.mse > 0)) throw Error(ErrorKind::DegenerateFit, "mse must be positive to fit a rate");
    ln.push_back(std::log(static_cast<double>(r.n)));
    lm.push_back(std::log(r.mse));
  }
  return fit_line(ln, lm);
}

Calibration calibrate_lambda(const PosteriorSpec& spec, const ScalingBasis& basis, double y, std::size_t n,
                             int reps, std::uint64_t seed, double r) {
  LevelPolicy pol;
  pol.kind = PolicyKind::Lepski;
  pol.r = r;
  const PolicyRunner runner(spec.family, basis, pol, y, n);
  Calibration cal;
  cal.m0 = runner.oracle_level(n);
  const auto grid = runner.grid(n);

  // per replication and level, the smallest lambda at which that level passes every test
  std::vector<std::vector<double>> crit;
  std::vector<int> levels = grid.levels();
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = replication_stream(seed, 0, 0, static_cast<std::size_t>(rep));
    const auto x = draw_sample(spec, n, rng);
    const auto tr = select_level(spec.family, basis, x, y, grid, 1.0, runner.gamma_sq());
    std::vector<double> c(levels.size(), 0.0);
    for (const auto& t : tr.tests) {
      const auto a = static_cast<std::size_t>(t.m - grid.m1);
      c[a] = std::max(c[a], std::sqrt(t.lhs / t.rhs));
    }
    crit.push_back(std::move(c));
  }
  double best = std::numeric_limits<double>::infinity();
  for (int e = -120; e <= 60; ++e) {
    const double lam = std::pow(10.0, e / 10.0);
    double dist = 0.0;
    std::vector<int> picks;
    for (const auto& c : crit) {
      std::size_t a = 0;
      while (a + 1 < c.size() && c[a] > lam) ++a;
      picks.push_back(levels[a]);
      dist += std::abs(levels[a] - cal.m0);
    }
    dist /= static_cast<double>(crit.size());
    if (dist < best - 1e-12) {
      best = dist;
      cal.lambda = lam;
      cal.mean_distance = dist;
      cal.m_hat = picks;
    }
  }
  return cal;
}

bool SuiteReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

}  // namespace ebw
