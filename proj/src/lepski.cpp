#include "ebwave/lepski.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "ebwave/errors.hpp"

namespace ebw {

double rho_sq(int m, double gamma_m_sq, double n) {
  if (!(n > 1)) throw Error(ErrorKind::ConfigError, "rho needs n > 1");
  return std::ldexp(1.0 + gamma_m_sq, m) * std::log(n) / n;
}

double compute_lambda(double p_sup, double psi_sup, double phi_sup, double C_phi, int M, double nu1, double nu2) {
  if (!(nu1 >= 0 && nu2 >= 0 && nu1 + nu2 < 1))
    throw Error(ErrorKind::InvalidNu, "need nu1, nu2 >= 0 and nu1 + nu2 < 1");
  if (!(p_sup > 0 && phi_sup > 0 && C_phi > 0 && psi_sup >= 0 && M >= 1))
    throw Error(ErrorKind::ConfigError, "sup-norms must be positive");
  const double Md = M;
  const double D = p_sup + psi_sup * phi_sup * Md * std::sqrt(Md) / std::sqrt(1.0 - nu1) +
                   16.0 * psi_sup * phi_sup * phi_sup * std::pow(p_sup, 1.5) * Md * Md * Md * std::sqrt(Md) / (1.0 - nu2);
  return 16.0 * C_phi * std::sqrt(p_sup) * std::sqrt(Md) * D + 1.0;
}

std::vector<int> LevelGrid::levels() const {
  std::vector<int> out;
  for (int m = m1; m <= mn; ++m) out.push_back(m);
  return out;
}

LevelGrid LevelGrid::theory(double n, const std::map<int, double>& gamma_sq_by_m) {
  if (!(n > std::exp(1.0))) throw Error(ErrorKind::ConfigError, "level grid needs n > e");
  const double ln = std::log(n);
  LevelGrid g;
  g.m1 = static_cast<int>(std::ceil(std::log2(ln)));
  const double cap = n / (ln * ln);
  g.mn = g.m1 - 1;
  for (const auto& [m, gsq] : gamma_sq_by_m)
    if (std::ldexp(gsq + 1.0, m) <= cap) g.mn = std::max(g.mn, m);
  if (g.empty())
    throw Error(ErrorKind::ConfigError, "empty level grid: 2^m (gamma_m^2 + 1) exceeds n / ln^2 n already at m1 = " +
                                            std::to_string(g.m1));
  return g;
}

LevelGrid LevelGrid::practical(double n) {
  if (!(n > std::exp(1.0))) throw Error(ErrorKind::ConfigError, "level grid needs n > e");
  const double ln = std::log(n);
  LevelGrid g;
  g.m1 = 0;
  g.mn = static_cast<int>(std::floor(std::log2(n / (ln * ln))));
  if (g.empty()) throw Error(ErrorKind::ConfigError, "empty level grid: n too small");
  return g;
}

std::map<int, double> gamma_sq_table(const FamilyModel& family, const ScalingBasis& basis, double y, int lo, int hi) {
  std::map<int, double> out;
  for (int m = lo; m <= hi; ++m) {
    const double g = gamma_vector(family, basis, m, y, 1).norm;
    out[m] = g * g;
  }
  return out;
}

SelectionTrace select_from_records(std::vector<LevelRecord> records, double lambda) {
  if (records.empty()) throw Error(ErrorKind::EmptyGrid, "no levels to select from");
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.m < b.m; });
  SelectionTrace tr;
  tr.lambda = lambda;
  const std::size_t L = records.size();
  std::vector<bool> admissible(L, true);
  for (std::size_t a = 0; a < L; ++a) {
    for (std::size_t b = a + 1; b < L; ++b) {
      const auto& rm = records[a];
      const auto& rj = records[b];
      PairTest t;
      t.m = rm.m;
      t.j = rj.m;
      const double d = rm.t_hat - rj.t_hat;
      t.lhs = d * d;
      const double norms = rm.norm_inv * rm.norm_inv + rj.norm_inv * rj.norm_inv;
      t.rhs = lambda * lambda * norms * norms * rj.rho_sq;
      t.pass = t.lhs <= t.rhs;
      if (!t.pass) admissible[a] = false;
      tr.tests.push_back(t);
    }
  }
  std::size_t pick = L;
  for (std::size_t a = 0; a < L; ++a)
    if (admissible[a]) {
      pick = a;
      break;
    }
  if (pick == L) {
    pick = L - 1;
    tr.flags.push_back("NoAdmissibleLevel");
  }
  tr.m_hat = records[pick].m;
  tr.t_hat = records[pick].t_hat;
  if (records[pick].low_density) tr.flags.push_back("LowDensity");
  tr.levels = std::move(records);
  return tr;
}

SelectionTrace select_level(const FamilyModel& family, const ScalingBasis& basis, std::span<const double> data,
                            double y, const LevelGrid& grid, double lambda,
                            const std::map<int, double>& gamma_sq_by_m) {
  if (grid.empty()) throw Error(ErrorKind::EmptyGrid, "level grid is empty");
  const double n = static_cast<double>(data.size());
  std::vector<LevelRecord> records;
  for (int m : grid.levels()) {
    const auto it = gamma_sq_by_m.find(m);
    if (it == gamma_sq_by_m.end()) throw Error(ErrorKind::ConfigError, "gamma_m^2 missing for m = " + std::to_string(m));
    const auto sys = build_system(family, basis, data, y, m);
    LevelRecord rec;
    rec.m = m;
    rec.t_hat = eval_estimate(basis, m, sys.K, sys.a_hat, y);
    rec.delta = sys.delta;
    rec.low_density = sys.low_density;
    Eigen::MatrixXd A = sys.B_hat;
    A.diagonal().array() += sys.delta;
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues()(0);
    rec.norm_inv = 1.0 / lmin;
    rec.rho_sq = rho_sq(m, it->second, n);
    records.push_back(rec);
  }
  return select_from_records(std::move(records), lambda);
}

int oracle_level(const std::map<int, double>& gamma_sq_by_m, double n, double r) {
  if (gamma_sq_by_m.empty()) throw Error(ErrorKind::EmptyGrid, "oracle level over an empty grid");
  if (!(r > 0)) throw Error(ErrorKind::ConfigError, "smoothness r must be positive");
  int best = gamma_sq_by_m.begin()->first;
  double best_val = std::numeric_limits<double>::infinity();
  for (const auto& [m, gsq] : gamma_sq_by_m) {
    const double v = std::ldexp(gsq + 1.0, m) / n + std::exp2(-2.0 * m * r);
    if (v < best_val) {
      best_val = v;
      best = m;
    }
  }
  return best;
}

double theory_lambda(const ScalingBasis& basis, std::span<const double> data, int m_top, int M, double theta_abs_max) {
  if (data.empty()) throw Error(ErrorKind::EmptyData, "no observations");
  const double width = std::ldexp(2.0, -m_top);
  std::map<std::int64_t, std::size_t> bins;
  for (double x : data) ++bins[static_cast<std::int64_t>(std::floor(x / width))];
  std::size_t top = 0;
  for (const auto& [b, c] : bins) top = std::max(top, c);
  const double p_sup = static_cast<double>(top) / (static_cast<double>(data.size()) * width);
  const double psi_sup = p_sup * theta_abs_max;
  return compute_lambda(p_sup, psi_sup, basis.sup_abs(0), basis.partition_abs_sup(), M, 0.0, 0.0);
}

}  // namespace ebw
