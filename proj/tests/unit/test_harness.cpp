#include <cmath>
#include <sstream>

#include "common.hpp"
#include "ebwave/harness.hpp"

using namespace ebw;
using ebw::test::db8;

TEST_CASE("line fits") {
  std::vector<double> x, y, c;
  for (int i = 0; i < 6; ++i) {
    x.push_back(std::log(std::ldexp(1.0, 8 + 2 * i)));
    y.push_back(std::log(3.0) - x.back());
    c.push_back(2.0);
  }
  CHECK(std::abs(fit_line(x, y).slope + 1.0) <= 1e-10);
  CHECK(std::abs(fit_line(x, c).slope) <= 1e-12);
  const std::vector<double> two{1, 2};
  CHECK(test::error_kind([&] { fit_line(two, two); }) == ErrorKind::DegenerateFit);
}

TEST_CASE("config parsing") {
  const auto cfg = parse_config(R"({"family": {"family": "weibull", "b": 2, "c1": 0.2, "c2": 50},
    "prior": {"prior": "gamma", "shape": 2, "rate": 1}, "y_points": [1.0], "n_grid": [1024, 2048, 4096],
    "replications": 3, "policy": {"kind": "fixed", "m": 2}, "seed": 5, "basis": {"wavelet": "db8", "depth": 12},
    "diagnostics": true})");
  CHECK(cfg.family.kind() == FamilyKind::Weibull);
  CHECK(cfg.family.b() == 2.0);
  CHECK(cfg.prior.kind() == PriorKind::Gamma);
  CHECK(cfg.policy.kind == PolicyKind::Fixed);
  CHECK(cfg.policy.m == 2);
  CHECK(cfg.diagnostics);

  const auto flat = parse_config(R"({"family": "normal", "sigma": 2, "prior": "normal", "mu0": 1, "sigma0": 1,
    "y_points": [0.5], "n_grid": [256], "replications": 1, "policy": "oracle", "seed": 1})");
  CHECK(flat.family.sigma() == 2.0);
  CHECK(flat.policy.kind == PolicyKind::Oracle);

  for (const char* bad : {R"({"family": "normal"})", "not json",
                          R"({"family": "normal", "prior": "normal", "y_points": [0], "n_grid": [512, 256], "replications": 1, "seed": 1})",
                          R"({"family": "normal", "prior": "normal", "y_points": [0], "n_grid": [512], "replications": 0, "seed": 1})",
                          R"({"family": "cauchy", "prior": "normal", "y_points": [0], "n_grid": [512], "replications": 1, "seed": 1})"})
    CHECK(test::error_kind([&] { parse_config(bad); }) == ErrorKind::ConfigError);
}

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.y_points = {0.0, 0.5};
  cfg.n_grid = {1024, 4096};
  cfg.replications = 8;
  cfg.policy.kind = PolicyKind::Lepski;
  cfg.seed = 11;
  return cfg;
}

std::string csv(const ExperimentResult& r) {
  std::ostringstream os;
  write_csv(r, os);
  return os.str();
}

}  // namespace

TEST_CASE("experiments are reproducible and thread-count independent") {
  auto cfg = small_config();
  const auto a = run_experiment(cfg, db8());
  const auto b = run_experiment(cfg, db8());
  CHECK(csv(a) == csv(b));
  cfg.threads = 3;
  const auto c = run_experiment(cfg, db8());
  REQUIRE(a.rows.size() == c.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].mse == doctest::Approx(c.rows[i].mse).epsilon(1e-12));
    CHECK(a.rows[i].t_hat == c.rows[i].t_hat);
  }
  cfg.replications = 1;
  cfg.threads = 1;
  CHECK(csv(run_experiment(cfg, db8())) == csv(run_experiment(cfg, db8())));
}

TEST_CASE("csv columns") {
  const auto out = csv(run_experiment(small_config(), db8()));
  CHECK(out.rfind("y,n,policy,reps_ok,reps_failed,mse,mse_stderr,bias_sq,var_mc,mean_mhat,sd_mhat\n", 0) == 0);
}

TEST_CASE("replication streams are distinct") {
  auto a = replication_stream(1, 0, 0, 0), b = replication_stream(1, 0, 0, 1), c = replication_stream(1, 0, 1, 0);
  const auto x = a(), y = b(), z = c();
  CHECK(x != y);
  CHECK(x != z);
  CHECK(y != z);
}

TEST_CASE("point mass prior at the estimation point") {
  ExperimentConfig cfg;
  cfg.prior = PriorModel::point_mass(0.7);
  cfg.y_points = {0.7};
  cfg.n_grid = {100000};
  cfg.replications = 5;
  cfg.policy.kind = PolicyKind::Fixed;
  cfg.policy.m = 2;
  const auto r = run_experiment(cfg, db8());
  CHECK(r.rows[0].t_true == doctest::Approx(0.7));
  CHECK(r.rows[0].mse <= 0.01);
}

TEST_CASE("risk falls with n under the oracle level") {
  ExperimentConfig cfg;
  cfg.y_points = {0.5};
  cfg.n_grid = {1u << 10, 1u << 16};
  cfg.replications = 200;
  cfg.policy.kind = PolicyKind::Oracle;
  cfg.seed = 3;
  const auto r = run_experiment(cfg, db8());
  CHECK(r.rows[1].mse < r.rows[0].mse);
  CHECK(!r.too_many_failures);
}

TEST_CASE("bias-variance split matches the Monte-Carlo risk") {
  ExperimentConfig cfg;
  cfg.y_points = {0.5};
  cfg.n_grid = {4096};
  cfg.replications = 100;
  cfg.policy.kind = PolicyKind::Fixed;
  cfg.policy.m = 1;
  cfg.diagnostics = true;
  cfg.seed = 12;
  const auto& row = run_experiment(cfg, db8()).rows[0];
  CHECK(std::isfinite(row.bias_sq));
  CHECK(row.mse >= 0.0);
  CHECK(row.mse >= row.bias_sq - 3 * row.mse_stderr);
  CHECK(std::abs(row.mse - (row.bias_sq + row.var_mc)) <= 5 * row.mse_stderr);
}

TEST_CASE("failed replications are counted, not dropped") {
  ExperimentConfig cfg;
  cfg.family = FamilyModel::normal(0.05);
  cfg.prior = PriorModel::point_mass(0.0);
  cfg.y_points = {3.0};
  cfg.n_grid = {64};
  cfg.replications = 4;
  cfg.policy.kind = PolicyKind::Fixed;
  cfg.policy.m = 1;
  // p(3) underflows, so the oracle itself refuses the point
  CHECK(test::error_kind([&] { run_experiment(cfg, db8()); }) == ErrorKind::VanishingMarginal);
}

TEST_CASE("rate fit from an experiment") {
  ExperimentResult r;
  for (std::size_t n : {1000, 2000, 4000, 8000}) {
    ResultRow row;
    row.y = 0.5;
    row.n = n;
    row.mse = 5.0 / static_cast<double>(n);
    r.rows.push_back(row);
  }
  CHECK(fit_rate(r, 0.5).slope == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("frozen lambda is reproduced by the calibration") {
  const PosteriorSpec nn(FamilyModel::normal(1), PriorModel::normal(0, 1));
  const auto cal = calibrate_lambda(nn, db8(), 0.5, 1u << 14, 100, 20240601, 7.0);
  CHECK(cal.lambda == doctest::Approx(kLambdaCal).epsilon(1e-12));
}

TEST_CASE("verify suites report") {
  const auto names = suite_names();
  CHECK(names.size() == 6);
  CHECK(verify_suite("oracle").pass());
  CHECK(test::error_kind([] { verify_suite("nonsense"); }) == ErrorKind::ConfigError);
}
