#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ebwave/bayes_oracle.hpp"
#include "ebwave/lepski.hpp"

namespace ebw {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

// Least squares y = intercept + slope x; DegenerateFit for < 3 points or constant x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

enum class PolicyKind { Fixed, Oracle, Lepski };

struct LevelPolicy {
  PolicyKind kind = PolicyKind::Oracle;
  int m = 0;          // fixed
  double r = 7.0;     // oracle smoothness
  LambdaMode lambda_mode = LambdaMode::Calibrated;
  double lambda_mult = 1.0;
  double theta_abs_max = 0.0;  // theory-mode ||Psi|| plug-in; 0 = from the prior support
  double delta_mult = 1.0;

  std::string label() const;
};

struct ExperimentConfig {
  FamilyModel family = FamilyModel::normal(1.0);
  PriorModel prior = PriorModel::normal(0.0, 1.0);
  std::vector<double> y_points;
  std::vector<std::size_t> n_grid;
  int replications = 1;
  LevelPolicy policy;
  std::uint64_t seed = 1;
  std::string basis = "db8";
  int basis_depth = 12;
  bool diagnostics = false;
  unsigned threads = 1;
};

// Reads the JSON config document; ConfigError on missing or invalid keys.
ExperimentConfig parse_config(const std::string& json_text);
FamilyModel parse_family(const std::string& json_text);
PriorModel parse_prior(const std::string& json_text);

struct ResultRow {
  double y = 0.0;
  std::size_t n = 0;
  std::string policy;
  int reps_ok = 0;
  int reps_failed = 0;
  double mse = 0.0;
  double mse_stderr = 0.0;
  double bias_sq = std::numeric_limits<double>::quiet_NaN();
  double var_mc = 0.0;
  double mean_mhat = 0.0;
  double sd_mhat = 0.0;
  double t_true = 0.0;
  int m_oracle = -1;
  std::vector<double> t_hat;  // per successful replication
  std::vector<int> m_hat;
  std::vector<std::string> errors;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  bool too_many_failures = false;
};

// Independent stream for replication (y, n, rep) of a master seed.
Rng replication_stream(std::uint64_t seed, std::size_t y_index, std::size_t n_index, std::size_t rep);

// theta_i ~ prior, X_i ~ q(. | theta_i)
std::vector<double> draw_sample(const PosteriorSpec& spec, std::size_t n, Rng& rng);

// Per-(y) cache of gamma_m^2 and everything else fixed across replications.
class PolicyRunner {
 public:
  PolicyRunner(const FamilyModel& family, const ScalingBasis& basis, const LevelPolicy& policy, double y,
               std::size_t n_max);

  const std::map<int, double>& gamma_sq() const { return gamma_sq_; }
  int oracle_level(std::size_t n) const;
  LevelGrid grid(std::size_t n) const;
  double lambda(std::span<const double> data, std::size_t n) const;

  struct Outcome {
    double t_hat = 0.0;
    int m = 0;
    bool low_density = false;
  };
  Outcome run(std::span<const double> data) const;
  SelectionTrace trace(std::span<const double> data) const;

 private:
  const FamilyModel* family_;
  const ScalingBasis* basis_;
  LevelPolicy policy_;
  double y_;
  std::map<int, double> gamma_sq_;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ScalingBasis& basis);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_csv(const ExperimentResult& result, std::ostream& out);

// log mse against log n over the rows sharing one y.
LineFit fit_rate(const ExperimentResult& result, double y);

// Frozen-lambda calibration: smallest lambda on a log grid minimising the mean
// |m_hat - m0| over the reference replications.
struct Calibration {
  double lambda = 0.0;
  int m0 = 0;
  double mean_distance = 0.0;
  std::vector<int> m_hat;
};
Calibration calibrate_lambda(const PosteriorSpec& spec, const ScalingBasis& basis, double y, std::size_t n,
                             int reps, std::uint64_t seed, double r);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  bool pass() const;
};

// Suites: basis, families, oracle, estimator, lepski, bounds, all.
SuiteReport verify_suite(const std::string& suite);
std::vector<std::string> suite_names();

}  // namespace ebw
