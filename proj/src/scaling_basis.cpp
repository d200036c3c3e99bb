#include "ebwave/scaling_basis.hpp"

#include <Eigen/Dense>
#include <bit>
#include <boost/math/filters/daubechies.hpp>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include "ebwave/errors.hpp"

namespace ebw {
namespace {

template <unsigned P>
std::vector<double> daubechies_filter() {
  auto h = boost::math::filters::daubechies_scaling_filter<double, P>();
  return {h.begin(), h.end()};
}

std::vector<double> filter_for(int p) {
  switch (p) {
    case 2: return daubechies_filter<2>();
    case 3: return daubechies_filter<3>();
    case 4: return daubechies_filter<4>();
    case 5: return daubechies_filter<5>();
    case 6: return daubechies_filter<6>();
    case 7: return daubechies_filter<7>();
    case 8: return daubechies_filter<8>();
    case 9: return daubechies_filter<9>();
    case 10: return daubechies_filter<10>();
    case 11: return daubechies_filter<11>();
    case 12: return daubechies_filter<12>();
    default: break;
  }
  throw Error(ErrorKind::UnknownWavelet, "no Daubechies filter with " + std::to_string(p) + " vanishing moments");
}

// Hoelder exponent of the Daubechies scaling function exceeds 2 from db6 on.
constexpr int kMinC2Daubechies = 6;

// Eigenvector of the integer-point refinement operator for eigenvalue 2^-order,
// i.e. the values phi^(order)(j) at interior integers j = 1..L-1.
Eigen::VectorXd integer_values(const std::vector<double>& h, int order) {
  const int L = static_cast<int>(h.size()) - 1;
  const int n = L - 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int j = 1; j <= n; ++j)
    for (int i = 1; i <= n; ++i) {
      const int idx = 2 * j - i;
      if (idx >= 0 && idx <= L) A(j - 1, i - 1) = std::sqrt(2.0) * h[idx];
    }
  const double lambda = std::ldexp(1.0, -order);
  Eigen::MatrixXd shifted = A - lambda * Eigen::MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(shifted, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // singular values sorted descending: last one must vanish, the previous one must not
  if (sv(n - 1) > 1e-9 || sv(n - 2) < 1e-7) {
    throw Error(ErrorKind::NonConvergentCascade,
                "eigenvalue 2^-" + std::to_string(order) + " eigenspace is not one-dimensional");
  }
  Eigen::VectorXd v = svd.matrixV().col(n - 1);
  // sum_j j^p phi^(p)(j) = (-1)^p p!
  double moment = 0.0;
  for (int j = 1; j <= n; ++j) moment += std::pow(static_cast<double>(j), order) * v(j - 1);
  double target = std::tgamma(order + 1.0) * ((order % 2) ? -1.0 : 1.0);
  if (std::abs(moment) < 1e-14)
    throw Error(ErrorKind::NonConvergentCascade, "degenerate normalisation moment");
  return v * (target / moment);
}

template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw Error(ErrorKind::IoError, "truncated basis cache");
  return value;
}

constexpr char kMagic[4] = {'E', 'B', 'W', 'B'};
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace

ScalingBasis ScalingBasis::build(const std::string& wavelet_name, int tab_depth) {
  int p = 0;
  if (wavelet_name.size() > 2 && wavelet_name.rfind("db", 0) == 0) {
    try {
      std::size_t used = 0;
      p = std::stoi(wavelet_name.substr(2), &used);
      if (used != wavelet_name.size() - 2) p = 0;
    } catch (const std::exception&) {
      p = 0;
    }
  }
  if (p < 2 || p > 12) throw Error(ErrorKind::UnknownWavelet, "unknown wavelet '" + wavelet_name + "'");
  if (p < kMinC2Daubechies)
    throw Error(ErrorKind::InsufficientRegularity,
                wavelet_name + " is not twice continuously differentiable");
  return from_filter(wavelet_name, filter_for(p), p, tab_depth);
}

ScalingBasis ScalingBasis::from_filter(std::string name, std::vector<double> filter,
                                       int vanishing_moments, int tab_depth) {
  if (tab_depth < 8 || tab_depth > 16)
    throw Error(ErrorKind::ConfigError, "tabulation depth must lie in [8, 16]");
  if (filter.size() < 4) throw Error(ErrorKind::UnknownWavelet, "filter too short");

  ScalingBasis b;
  b.name_ = std::move(name);
  b.filter_ = std::move(filter);
  b.m1_ = 0;
  b.m2_ = static_cast<int>(b.filter_.size()) - 1;
  b.s_ = vanishing_moments;
  b.depth_ = tab_depth;
  b.step_ = std::ldexp(1.0, -tab_depth);

  const int L = b.m2_;
  const auto& h = b.filter_;
  for (int order = 0; order < kOrders; ++order) {
    Eigen::VectorXd ints = integer_values(h, order);
    // level-0 grid: integers 0..L
    std::vector<double> cur(L + 1, 0.0);
    for (int j = 1; j < L; ++j) cur[j] = ints(j - 1);
    const double scale = std::sqrt(2.0) * std::ldexp(1.0, order);
    for (int d = 1; d <= tab_depth; ++d) {
      const std::size_t prev_per_unit = std::size_t{1} << (d - 1);
      const std::size_t per_unit = prev_per_unit * 2;
      std::vector<double> next(static_cast<std::size_t>(L) * per_unit + 1, 0.0);
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (i % 2 == 0) {
          next[i] = cur[i / 2];
          continue;
        }
        // phi(i/2^d) = sqrt2 2^order sum_k h_k phi(i/2^(d-1) - k)
        double acc = 0.0;
        for (int k = 0; k <= L; ++k) {
          const auto shift = static_cast<std::int64_t>(k * prev_per_unit);
          const auto idx = static_cast<std::int64_t>(i) - shift;
          if (idx < 0) break;
          if (idx < static_cast<std::int64_t>(cur.size())) acc += h[k] * cur[static_cast<std::size_t>(idx)];
        }
        next[i] = scale * acc;
      }
      cur = std::move(next);
    }
    b.table_[order] = std::move(cur);
  }
  b.finish_tables();
  return b;
}

void ScalingBasis::finish_tables() {
  const auto& f = table_[0];
  const auto& df = table_[1];
  cumulative_.assign(f.size(), 0.0);
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    cumulative_[i + 1] = cumulative_[i] + 0.5 * step_ * (f[i] + f[i + 1]) +
                         step_ * step_ / 12.0 * (df[i] - df[i + 1]);
  }
}

double ScalingBasis::eval(double x, int order) const {
  if (!(x >= m1_ && x <= m2_)) return 0.0;
  const auto& t = table_[order];
  const double pos = (x - m1_) / step_;
  auto i = static_cast<std::size_t>(pos);
  if (i >= t.size() - 1) return t.back();
  const double w = pos - static_cast<double>(i);
  return t[i] + w * (t[i + 1] - t[i]);
}

double ScalingBasis::phi_mk(int m, std::int64_t k, double x, int order) const {
  const double scale = std::ldexp(1.0, m);
  const double factor = std::sqrt(scale) * std::pow(scale, order);
  return factor * eval(scale * x - static_cast<double>(k), order);
}

double ScalingBasis::antiderivative(double z) const {
  if (z <= m1_) return 0.0;
  if (z >= m2_) return cumulative_.back();
  const double pos = (z - m1_) / step_;
  auto i = static_cast<std::size_t>(pos);
  if (i >= cumulative_.size() - 1) return cumulative_.back();
  const auto& f = table_[0];
  const double dz = z - grid_point(i);
  const double slope = (f[i + 1] - f[i]) / step_;
  return cumulative_[i] + dz * (f[i] + 0.5 * dz * slope);
}

double ScalingBasis::partition_abs_sup() const {
  const std::size_t per_unit = std::size_t{1} << depth_;
  const auto& f = table_[0];
  double best = 0.0;
  for (std::size_t off = 0; off < per_unit; ++off) {
    double sum = 0.0;
    for (std::size_t i = off; i < f.size(); i += per_unit) sum += std::abs(f[i]);
    best = std::max(best, sum);
  }
  return best;
}

double ScalingBasis::sup_abs(int order) const {
  double best = 0.0;
  for (double v : table_.at(order)) best = std::max(best, std::abs(v));
  return best;
}

IndexSet ScalingBasis::index_set(int m, double y) const {
  const double centre = std::ldexp(y, m);
  const double pad = static_cast<double>(s_) * (m2_ - m1_);
  IndexSet K;
  K.m = m;
  K.y = y;
  K.k_lo = static_cast<std::int64_t>(std::ceil(centre - m2_ - pad));
  K.k_hi = static_cast<std::int64_t>(std::floor(centre - m1_ + pad));
  return K;
}

void ScalingBasis::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kCacheVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name_.size()));
  os.write(name_.data(), static_cast<std::streamsize>(name_.size()));
  write_le<std::int32_t>(os, m1_);
  write_le<std::int32_t>(os, m2_);
  write_le<std::int32_t>(os, s_);
  write_le<std::int32_t>(os, depth_);
  write_le<std::uint64_t>(os, grid_size());
  for (const auto& t : table_)
    for (double v : t) write_le<double>(os, v);
  if (!os) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

ScalingBasis ScalingBasis::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorKind::IoError, "not a basis cache file");
  if (read_le<std::uint32_t>(is) != kCacheVersion) throw Error(ErrorKind::IoError, "unsupported cache version");
  const auto name_len = read_le<std::uint32_t>(is);
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  ScalingBasis b;
  b.name_ = name;
  b.m1_ = read_le<std::int32_t>(is);
  b.m2_ = read_le<std::int32_t>(is);
  b.s_ = read_le<std::int32_t>(is);
  b.depth_ = read_le<std::int32_t>(is);
  const auto count = read_le<std::uint64_t>(is);
  const std::uint64_t expected = static_cast<std::uint64_t>(b.m2_ - b.m1_) * (std::uint64_t{1} << b.depth_) + 1;
  if (count != expected) throw Error(ErrorKind::IoError, "grid size does not match header");
  b.step_ = std::ldexp(1.0, -b.depth_);
  for (auto& t : b.table_) {
    t.resize(count);
    for (auto& v : t) v = read_le<double>(is);
  }
  // Filter is not part of the cache; recover it when the name is a known filter.
  try {
    b.filter_ = build(b.name_, 8).filter_;
  } catch (const Error&) {
  }
  b.finish_tables();
  return b;
}

double phi_moment(const ScalingBasis& basis, int p) {
  auto f = basis.table(0);
  return basis.integrate_grid([&](double z, std::size_t i) {
    double v = f[i];
    for (int j = 0; j < p; ++j) v *= z;
    return v;
  });
}

MomentReport check_vanishing_moments(const ScalingBasis& basis, int max_order,
                                     std::span<const double> z_grid) {
  MomentReport rep;
  rep.max_order = max_order;
  // Int (t + k)^a phi(t) dt = sum_b C(a, b) k^(a-b) mu_b with mu_b = Int t^b phi
  std::vector<double> mu;
  for (int b = 0; b <= max_order; ++b) mu.push_back(phi_moment(basis, b));
  for (int a = 0; a <= max_order; ++a) {
    std::vector<double> row;
    for (double z : z_grid) {
      const auto k_lo = static_cast<std::int64_t>(std::ceil(z - basis.support_hi()));
      const auto k_hi = static_cast<std::int64_t>(std::floor(z - basis.support_lo()));
      double total = 0.0;
      for (auto k = k_lo; k <= k_hi; ++k) {
        const double w = basis.eval(z - static_cast<double>(k), 0);
        if (w == 0.0) continue;
        const double kk = static_cast<double>(k);
        double mom = 0.0, binom = 1.0;
        for (int b = a; b >= 0; --b) {
          mom += binom * std::pow(kk, a - b) * mu[b];
          binom = binom * b / (a - b + 1);
        }
        total += w * mom;
      }
      const double r = std::abs(total - std::pow(z, a));
      row.push_back(r);
      rep.max_residual = std::max(rep.max_residual, r);
    }
    rep.residual.push_back(std::move(row));
  }
  return rep;
}

double refinement_residual(const ScalingBasis& basis, int order) {
  const auto tab = basis.table(order);
  const auto h = basis.filter();
  const auto per_unit = std::int64_t{1} << basis.depth();
  const auto n = static_cast<std::int64_t>(tab.size());
  const double scale = std::sqrt(2.0) * std::ldexp(1.0, order);
  double worst = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    // 2x - k sits at the even table index 2i - k 2^J, a point of the depth J-1 grid
    double acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
      const std::int64_t idx = 2 * i - static_cast<std::int64_t>(k) * per_unit;
      if (idx >= 0 && idx < n) acc += h[k] * tab[static_cast<std::size_t>(idx)];
    }
    worst = std::max(worst, std::abs(tab[static_cast<std::size_t>(i)] - scale * acc));
  }
  return worst;
}

}  // namespace ebw
