#include <json.hpp>

#include "ebwave/errors.hpp"
#include "ebwave/harness.hpp"

namespace ebw {
namespace {

using json = nlohmann::json;

json parse_doc(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed JSON: ") + e.what());
  }
}

template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::ConfigError, std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::ConfigError, std::string("key '") + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, key) : fallback;
}

// Accepts {"family": {"family": "normal", "sigma": 1}} as well as the flat
// form with the parameters next to "family".
json section(const json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(ErrorKind::ConfigError, std::string("missing key '") + key + "'");
  if (doc.at(key).is_object()) return doc.at(key);
  return doc;
}

FamilyModel family_from(const json& j) {
  const auto name = get<std::string>(j, "family");
  if (name == "normal") return FamilyModel::normal(get_or(j, "sigma", 1.0));
  if (name == "double_exponential") return FamilyModel::double_exponential(get_or(j, "sigma", 1.0));
  if (name == "weibull")
    return FamilyModel::weibull(get<double>(j, "b"), get_or(j, "c1", 0.1), get_or(j, "c2", 100.0));
  if (name == "gamma")
    return FamilyModel::gamma(get<double>(j, "beta"), get_or(j, "c1", 0.1), get_or(j, "c2", 100.0));
  if (name == "uniform") return FamilyModel::uniform_scale(get<double>(j, "theta_lo"), get<double>(j, "theta_hi"));
  throw Error(ErrorKind::ConfigError, "unknown family '" + name + "'");
}

PriorModel prior_from(const json& j) {
  const auto name = get<std::string>(j, "prior");
  if (name == "normal") return PriorModel::normal(get_or(j, "mu0", 0.0), get_or(j, "sigma0", 1.0));
  if (name == "gamma") return PriorModel::gamma(get<double>(j, "shape"), get<double>(j, "rate"));
  if (name == "point_mass") return PriorModel::point_mass(get<double>(j, "theta0"));
  if (name == "uniform") return PriorModel::uniform(get<double>(j, "lo"), get<double>(j, "hi"));
  throw Error(ErrorKind::ConfigError, "unknown prior '" + name + "'");
}

LevelPolicy policy_from(const json& j) {
  LevelPolicy p;
  json body = j;
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
    body = json::object();
  } else {
    kind = get<std::string>(j, "kind");
  }
  if (kind == "fixed") {
    p.kind = PolicyKind::Fixed;
    p.m = get<int>(body, "m");
  } else if (kind == "oracle") {
    p.kind = PolicyKind::Oracle;
  } else if (kind == "lepski") {
    p.kind = PolicyKind::Lepski;
    const auto mode = get_or<std::string>(body, "lambda_mode", "calibrated");
    if (mode == "theory") p.lambda_mode = LambdaMode::Theory;
    else if (mode != "calibrated") throw Error(ErrorKind::ConfigError, "lambda_mode must be theory or calibrated");
    p.lambda_mult = get_or(body, "lambda_mult", 1.0);
    p.theta_abs_max = get_or(body, "theta_abs_max", 0.0);
  } else {
    throw Error(ErrorKind::ConfigError, "unknown policy '" + kind + "'");
  }
  p.r = get_or(body, "r", 7.0);
  p.delta_mult = get_or(body, "delta_mult", 1.0);
  if (!(p.r > 0)) throw Error(ErrorKind::ConfigError, "policy r must be positive");
  if (!(p.lambda_mult > 0)) throw Error(ErrorKind::ConfigError, "lambda_mult must be positive");
  return p;
}

}  // namespace

FamilyModel parse_family(const std::string& json_text) { return family_from(parse_doc(json_text)); }
PriorModel parse_prior(const std::string& json_text) { return prior_from(parse_doc(json_text)); }

ExperimentConfig parse_config(const std::string& json_text) {
  const json doc = parse_doc(json_text);
  if (!doc.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  ExperimentConfig cfg;
  cfg.family = family_from(section(doc, "family"));
  cfg.prior = prior_from(section(doc, "prior"));
  cfg.y_points = get<std::vector<double>>(doc, "y_points");
  cfg.n_grid = get<std::vector<std::size_t>>(doc, "n_grid");
  cfg.replications = get<int>(doc, "replications");
  cfg.policy = policy_from(doc.contains("policy") ? doc.at("policy") : json("oracle"));
  cfg.seed = get<std::uint64_t>(doc, "seed");
  if (doc.contains("basis")) {
    const auto& b = doc.at("basis");
    if (b.is_string()) {
      cfg.basis = b.get<std::string>();
    } else {
      cfg.basis = get_or<std::string>(b, "wavelet", "db8");
      cfg.basis_depth = get_or(b, "depth", 12);
    }
  }
  cfg.diagnostics = get_or(doc, "diagnostics", false);
  cfg.threads = get_or(doc, "threads", 1u);
  if (cfg.replications < 1) throw Error(ErrorKind::ConfigError, "replications must be >= 1");
  if (cfg.y_points.empty()) throw Error(ErrorKind::ConfigError, "y_points is empty");
  if (cfg.n_grid.empty()) throw Error(ErrorKind::ConfigError, "n_grid is empty");
  for (std::size_t i = 1; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] <= cfg.n_grid[i - 1]) throw Error(ErrorKind::ConfigError, "n_grid must be strictly increasing");
  if (cfg.n_grid.front() < 16) throw Error(ErrorKind::ConfigError, "n must be at least 16");
  for (double y : cfg.y_points) {
    try {
      cfg.family.check_estimation_point(y);
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, e.what());
    }
  }
  // validates prior against the family's theta-domain
  (void)PosteriorSpec(cfg.family, cfg.prior);
  return cfg;
}

}  // namespace ebw
