#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ebwave/errors.hpp"
#include "ebwave/estimator.hpp"
#include "ebwave/harness.hpp"
#include "ebwave/lower_bounds.hpp"

namespace {

using json = nlohmann::json;
using namespace ebw;

constexpr int kExitVerify = 2;
constexpr int kExitConfig = 3;

struct FamilyArgs {
  std::string name = "normal";
  double sigma = 1.0, b = 2.0, beta = 2.0, c1 = 0.1, c2 = 100.0, theta_lo = 1.0, theta_hi = 10.0;

  void add(CLI::App* app) {
    app->add_option("--family", name, "normal | double_exponential | weibull | gamma | uniform")->required();
    app->add_option("--sigma", sigma, "scale of the location families");
    app->add_option("--b", b, "Weibull shape");
    app->add_option("--beta", beta, "Gamma shape");
    app->add_option("--c1", c1, "lower end of the exponential-family theta domain");
    app->add_option("--c2", c2, "upper end of the exponential-family theta domain");
    app->add_option("--theta-lo", theta_lo, "uniform-scale theta lower bound");
    app->add_option("--theta-hi", theta_hi, "uniform-scale theta upper bound");
  }
  FamilyModel model() const {
    json j{{"family", name}, {"sigma", sigma}, {"b", b}, {"beta", beta}, {"c1", c1}, {"c2", c2},
           {"theta_lo", theta_lo}, {"theta_hi", theta_hi}};
    return parse_family(j.dump());
  }
};

struct PriorArgs {
  std::string name = "normal";
  double mu0 = 0.0, sigma0 = 1.0, shape = 2.0, rate = 1.0, theta0 = 0.0, lo = 1.0, hi = 2.0;

  void add(CLI::App* app) {
    app->add_option("--prior", name, "normal | gamma | point_mass | uniform")->required();
    app->add_option("--mu0", mu0);
    app->add_option("--sigma0", sigma0);
    app->add_option("--shape", shape);
    app->add_option("--rate", rate);
    app->add_option("--theta0", theta0);
    app->add_option("--lo", lo);
    app->add_option("--hi", hi);
  }
  PriorModel model() const {
    json j{{"prior", name}, {"mu0", mu0}, {"sigma0", sigma0}, {"shape", shape}, {"rate", rate},
           {"theta0", theta0}, {"lo", lo}, {"hi", hi}};
    return parse_prior(j.dump());
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> read_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open " + path);
  std::vector<double> x;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      x.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "not a number in " + path + ": " + line);
    }
  }
  return x;
}

json trace_json(const SelectionTrace& tr) {
  json levels = json::array(), tests = json::array();
  for (const auto& l : tr.levels)
    levels.push_back({{"m", l.m}, {"t_hat", l.t_hat}, {"norm_inv", l.norm_inv}, {"rho_sq", l.rho_sq}, {"delta", l.delta}});
  for (const auto& t : tr.tests) tests.push_back({{"m", t.m}, {"j", t.j}, {"lhs", t.lhs}, {"rhs", t.rhs}, {"pass", t.pass}});
  return {{"levels", levels}, {"tests", tests}, {"m_hat", tr.m_hat}, {"lambda", tr.lambda}, {"flags", tr.flags}};
}

int cmd_tabulate(const std::string& wavelet, int depth, const std::string& out) {
  const auto b = ScalingBasis::build(wavelet, depth);
  b.save(out);
  std::printf("%s: support [%d, %d], s = %d, %zu grid points -> %s\n", b.name().c_str(), b.support_lo(), b.support_hi(),
              b.vanishing_moments(), b.grid_size(), out.c_str());
  return 0;
}

struct EstimateArgs {
  FamilyArgs family;
  std::string data, m = "auto", lambda_mode = "calibrated", trace, wavelet = "db8";
  double y = 0.0, delta_mult = 1.0, lambda_mult = 1.0, theta_abs_max = 0.0;
};

int cmd_estimate(const EstimateArgs& a) {
  const auto family = a.family.model();
  const auto basis = ScalingBasis::build(a.wavelet, 12);
  const auto x = read_data(a.data);
  json out;
  if (a.m == "auto") {
    LevelPolicy p;
    p.kind = PolicyKind::Lepski;
    p.lambda_mode = a.lambda_mode == "theory" ? LambdaMode::Theory : LambdaMode::Calibrated;
    if (a.lambda_mode != "theory" && a.lambda_mode != "calibrated")
      throw Error(ErrorKind::ConfigError, "--lambda-mode must be theory or calibrated");
    p.lambda_mult = a.lambda_mult;
    p.theta_abs_max = a.theta_abs_max;
    p.delta_mult = a.delta_mult;
    const PolicyRunner runner(family, basis, p, a.y, x.size());
    const auto tr = runner.trace(x);
    const auto res = estimate(family, basis, x, a.y, tr.m_hat, DeltaPolicy{a.delta_mult});
    out = {{"t_hat", tr.t_hat}, {"m", tr.m_hat}, {"M", res.system.K.size()}, {"delta", res.system.delta},
           {"min_eigenvalue", res.min_eigenvalue}, {"lambda", tr.lambda}, {"flags", tr.flags}};
    if (!a.trace.empty()) {
      std::ofstream f(a.trace);
      if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + a.trace);
      f << trace_json(tr).dump(2) << "\n";
    }
  } else {
    int m = 0;
    try {
      m = std::stoi(a.m);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "--m must be an integer or auto");
    }
    const auto res = estimate(family, basis, x, a.y, m, DeltaPolicy{a.delta_mult});
    out = {{"t_hat", res.t_hat}, {"m", m}, {"M", res.system.K.size()}, {"delta", res.system.delta},
           {"min_eigenvalue", res.min_eigenvalue}, {"low_density", res.system.low_density}};
  }
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_lower_bound(const FamilyArgs& fa, const PriorArgs& pa, double r, double y, const std::vector<double>& n_grid,
                    const std::string& out) {
  const PosteriorSpec spec(fa.model(), pa.model());
  const auto tr = rate_trace(spec, r, y, n_grid);
  std::ofstream f(out);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + out);
  f << "n,h,zeta,kl_exact,kl_bound,gap,gap_sq\n";
  char buf[512];
  for (const auto& row : tr.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.n, row.h, row.zeta, row.kl_exact,
                  row.kl_bound, row.gap, row.gap_sq);
    f << buf;
  }
  std::printf("gap^2 exponent %.4f (expected %.4f), KL bound max/min %.3f, exact <= bound: %s\n", tr.exponent,
              tr.expected_exponent, tr.kl_band, tr.kl_ordered ? "yes" : "no");
  return 0;
}

int cmd_simulate(const std::string& config, const std::string& out) {
  const auto cfg = parse_config(slurp(config));
  const auto res = run_experiment(cfg);
  std::ofstream f(out);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + out);
  write_csv(res, f);
  for (const auto& row : res.rows)
    for (const auto& e : row.errors) std::fprintf(stderr, "y=%g n=%zu: %s\n", row.y, row.n, e.c_str());
  if (res.too_many_failures) {
    std::fprintf(stderr, "more than 1%% of replications failed\n");
    return 1;
  }
  return 0;
}

int cmd_verify(const std::string& suite) {
  const auto rep = verify_suite(suite);
  for (const auto& c : rep.checks)
    std::printf("%s  %s%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.empty() ? "" : "  ", c.detail.c_str());
  std::printf("%s: %s\n", suite.c_str(), rep.pass() ? "all checks passed" : "FAILED");
  return rep.pass() ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet empirical Bayes estimation toolkit"};
  app.require_subcommand(1);

  auto* tab = app.add_subcommand("tabulate-basis", "tabulate phi, phi', phi'' to a binary cache file");
  std::string wavelet = "db8", tab_out;
  int depth = 12;
  tab->add_option("--wavelet", wavelet, "Daubechies id, db6..db12");
  tab->add_option("--depth", depth, "dyadic depth J");
  tab->add_option("--out", tab_out)->required();

  auto* est = app.add_subcommand("estimate", "estimate t(y) from one X per line");
  EstimateArgs ea;
  ea.family.add(est);
  est->add_option("--data", ea.data)->required();
  est->add_option("--y", ea.y)->required();
  est->add_option("--m", ea.m, "level or auto");
  est->add_option("--delta-mult", ea.delta_mult);
  est->add_option("--lambda-mode", ea.lambda_mode, "theory | calibrated");
  est->add_option("--lambda-mult", ea.lambda_mult);
  est->add_option("--theta-abs-max", ea.theta_abs_max, "bound on |theta| for the theory lambda");
  est->add_option("--trace", ea.trace, "write the Lepski trace as JSON");
  est->add_option("--wavelet", ea.wavelet);

  auto* lb = app.add_subcommand("lower-bound", "two-point lower-bound trace");
  FamilyArgs lf;
  PriorArgs lp;
  double lr = 1.0, ly = 0.5;
  std::vector<double> n_grid;
  std::string lb_out;
  lf.add(lb);
  lp.add(lb);
  lb->add_option("--r", lr)->required();
  lb->add_option("--y", ly)->required();
  lb->add_option("--n-grid", n_grid)->required()->delimiter(',');
  lb->add_option("--out", lb_out)->required();

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo experiment from a JSON config");
  std::string config, sim_out;
  sim->add_option("--config", config)->required();
  sim->add_option("--out", sim_out)->required();

  auto* ver = app.add_subcommand("verify", "run a property suite");
  std::string suite = "all";
  ver->add_option("--suite", suite, "basis | families | oracle | estimator | lepski | bounds | all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*tab) return cmd_tabulate(wavelet, depth, tab_out);
    if (*est) return cmd_estimate(ea);
    if (*lb) return cmd_lower_bound(lf, lp, lr, ly, n_grid, lb_out);
    if (*sim) return cmd_simulate(config, sim_out);
    if (*ver) return cmd_verify(suite);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::ConfigError ? kExitConfig : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
