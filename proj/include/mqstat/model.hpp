#ifndef MQSTAT_MODEL_HPP
#define MQSTAT_MODEL_HPP

// Domain types: the function phi, one-dimensional margins, pairwise copulas
// and sample batches. All values are immutable once constructed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mqstat/errors.hpp"
#include "mqstat/quadrature.hpp"
#include "mqstat/rng.hpp"
#include "mqstat/special.hpp"

namespace mqstat {

// ---------------------------------------------------------------------------
// FunctionSpec

/// The map phi from raw observation space R^d to R, optionally with analytic
/// diagonal derivatives of psi = phi o (F_1^-1, ..., F_d^-1). The analytic
/// derivatives are only meaningful for the margins they were derived for.
class FunctionSpec {
public:
  using Eval = std::function<double(std::span<const double>)>;
  using DiagGrad = std::function<std::vector<double>(double)>;
  /// Row-major d x d.
  using DiagHess = std::function<std::vector<double>(double)>;

  FunctionSpec(std::size_t dim, Eval eval, std::string name = "phi")
      : dim_(dim), eval_(std::move(eval)), name_(std::move(name)) {
    if (dim_ == 0) throw ParameterError("FunctionSpec: dimension must be positive");
    if (!eval_) throw ParameterError("FunctionSpec: eval must be callable");
  }

  std::size_t dim() const noexcept { return dim_; }
  const std::string &name() const noexcept { return name_; }

  double operator()(std::span<const double> x) const { return eval_(x); }

  bool has_diag_grad() const noexcept { return static_cast<bool>(diag_grad_); }
  bool has_diag_hess() const noexcept { return static_cast<bool>(diag_hess_); }
  std::vector<double> diag_grad(double x) const { return diag_grad_(x); }
  std::vector<double> diag_hess(double x) const { return diag_hess_(x); }

  FunctionSpec with_diag_grad(DiagGrad g) const {
    FunctionSpec out = *this;
    out.diag_grad_ = std::move(g);
    return out;
  }
  FunctionSpec with_diag_hess(DiagHess h) const {
    FunctionSpec out = *this;
    out.diag_hess_ = std::move(h);
    return out;
  }
  /// Same phi with the analytic derivatives dropped.
  FunctionSpec numeric_only() const { return FunctionSpec(dim_, eval_, name_); }

  /// c * phi, carrying scaled analytic derivatives along.
  FunctionSpec scaled(double c) const {
    auto inner = eval_;
    FunctionSpec out(dim_, [inner, c](std::span<const double> x) { return c * inner(x); },
                     name_ + "*c");
    if (diag_grad_) {
      out.diag_grad_ = [g = diag_grad_, c](double x) {
        auto v = g(x);
        for (auto &e : v) e *= c;
        return v;
      };
    }
    if (diag_hess_) {
      out.diag_hess_ = [h = diag_hess_, c](double x) {
        auto v = h(x);
        for (auto &e : v) e *= c;
        return v;
      };
    }
    return out;
  }

private:
  std::size_t dim_;
  Eval eval_;
  DiagGrad diag_grad_;
  DiagHess diag_hess_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// MarginalModel

namespace margin {

struct Uniform {
  double lo = 0.0, hi = 1.0;
};
struct Exponential {
  double rate = 1.0;
};
struct Normal {
  double mean = 0.0, sd = 1.0;
};
/// Discrete margin on a finite support. `cumulative` ends at exactly 1.
struct Empirical {
  std::vector<double> support;
  std::vector<double> weights;
  std::vector<double> cumulative;
};
/// Piecewise-linear CDF through (x_k, F_k); quantile by bisection.
struct Tabulated {
  std::vector<double> xs;
  std::vector<double> cdf;
};
/// Caller-supplied CDF and quantile, e.g. the pushforward of another margin.
struct Custom {
  std::string label;
  std::function<double(double)> cdf;
  std::function<double(double)> quantile;
};

} // namespace margin

class MarginalModel {
public:
  using Repr = std::variant<margin::Uniform, margin::Exponential, margin::Normal,
                            margin::Empirical, margin::Tabulated, margin::Custom>;

  static MarginalModel uniform(double lo = 0.0, double hi = 1.0) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
      throw ParameterError("uniform margin: need finite lo < hi");
    }
    return MarginalModel(margin::Uniform{lo, hi});
  }

  static MarginalModel exponential(double rate = 1.0) {
    if (!(std::isfinite(rate) && rate > 0.0)) {
      throw ParameterError("exponential margin: rate must be positive");
    }
    return MarginalModel(margin::Exponential{rate});
  }

  static MarginalModel normal(double mean = 0.0, double sd = 1.0) {
    if (!(std::isfinite(mean) && std::isfinite(sd) && sd > 0.0)) {
      throw ParameterError("normal margin: sd must be positive");
    }
    return MarginalModel(margin::Normal{mean, sd});
  }

  /// Weights default to equal; duplicate support points are merged.
  static MarginalModel empirical(std::vector<double> support, std::vector<double> weights = {}) {
    if (support.empty()) throw ParameterError("empirical margin: empty support");
    if (weights.empty()) weights.assign(support.size(), 1.0);
    if (weights.size() != support.size()) {
      throw ParameterError("empirical margin: support and weights differ in length");
    }
    std::vector<std::size_t> order(support.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
    margin::Empirical e;
    for (std::size_t idx : order) {
      const double x = support[idx];
      const double w = weights[idx];
      if (!std::isfinite(x) || !std::isfinite(w) || w < 0.0) {
        throw ParameterError("empirical margin: support and weights must be finite, weights >= 0");
      }
      if (!e.support.empty() && e.support.back() == x) {
        e.weights.back() += w;
      } else {
        e.support.push_back(x);
        e.weights.push_back(w);
      }
    }
    const double total = std::accumulate(e.weights.begin(), e.weights.end(), 0.0);
    if (!(total > 0.0)) throw ParameterError("empirical margin: weights sum to zero");
    double run = 0.0;
    for (auto &w : e.weights) {
      w /= total;
      run += w;
      e.cumulative.push_back(run);
    }
    e.cumulative.back() = 1.0;
    return MarginalModel(std::move(e));
  }

  static MarginalModel tabulated(std::vector<double> xs, std::vector<double> cdf) {
    if (xs.size() < 2 || xs.size() != cdf.size()) {
      throw ParameterError("tabulated margin: need >= 2 matching (x, F) points");
    }
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (!(xs[i] > xs[i - 1]) || cdf[i] < cdf[i - 1]) {
        throw ParameterError("tabulated margin: x must increase and F must not decrease");
      }
    }
    if (cdf.front() != 0.0 || cdf.back() != 1.0) {
      throw ParameterError("tabulated margin: F must run from 0 to 1");
    }
    return MarginalModel(margin::Tabulated{std::move(xs), std::move(cdf)});
  }

  static MarginalModel custom(std::string label, std::function<double(double)> cdf,
                              std::function<double(double)> quantile) {
    if (!cdf || !quantile) throw ParameterError("custom margin: cdf and quantile required");
    return MarginalModel(margin::Custom{std::move(label), std::move(cdf), std::move(quantile)});
  }

  const Repr &repr() const noexcept { return repr_; }

  bool is_standard_uniform() const {
    const auto *u = std::get_if<margin::Uniform>(&repr_);
    return u != nullptr && u->lo == 0.0 && u->hi == 1.0;
  }
  bool is_empirical() const { return std::holds_alternative<margin::Empirical>(repr_); }

  std::string kind() const {
    return std::visit(
        [](const auto &m) -> std::string {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, margin::Uniform>) return "uniform";
          else if constexpr (std::is_same_v<T, margin::Exponential>) return "exponential";
          else if constexpr (std::is_same_v<T, margin::Normal>) return "normal";
          else if constexpr (std::is_same_v<T, margin::Empirical>) return "empirical";
          else if constexpr (std::is_same_v<T, margin::Tabulated>) return "tabulated";
          else return "custom";
        },
        repr_);
  }

  double cdf(double x) const {
    return std::visit([x](const auto &m) { return cdf_of(m, x); }, repr_);
  }

  /// Generalized inverse inf{x : F(x) >= t}.
  double quantile(double t) const {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("quantile: t must lie in (0,1)");
    return std::visit([t](const auto &m) { return quantile_of(m, t); }, repr_);
  }

  /// Draw by inversion; the rng state is owned by the caller.
  double sample(Rng &rng) const { return quantile(rng.uniform()); }

  /// Jump locations t = F(x_k) of a discrete margin (excluding the final 1).
  std::vector<double> jump_levels() const {
    if (const auto *e = std::get_if<margin::Empirical>(&repr_)) {
      return {e->cumulative.begin(), e->cumulative.end() - 1};
    }
    return {};
  }

private:
  explicit MarginalModel(Repr r) : repr_(std::move(r)) {}

  static double cdf_of(const margin::Uniform &m, double x) {
    if (x <= m.lo) return 0.0;
    if (x >= m.hi) return 1.0;
    return (x - m.lo) / (m.hi - m.lo);
  }
  static double quantile_of(const margin::Uniform &m, double t) {
    return m.lo == 0.0 && m.hi == 1.0 ? t : m.lo + t * (m.hi - m.lo);
  }
  static double cdf_of(const margin::Exponential &m, double x) {
    return x <= 0.0 ? 0.0 : -std::expm1(-m.rate * x);
  }
  static double quantile_of(const margin::Exponential &m, double t) {
    return -std::log1p(-t) / m.rate;
  }
  static double cdf_of(const margin::Normal &m, double x) {
    return normal_cdf((x - m.mean) / m.sd);
  }
  static double quantile_of(const margin::Normal &m, double t) {
    return m.mean + m.sd * normal_quantile(t);
  }
  static double cdf_of(const margin::Empirical &m, double x) {
    const auto it = std::upper_bound(m.support.begin(), m.support.end(), x);
    if (it == m.support.begin()) return 0.0;
    return m.cumulative[static_cast<std::size_t>(it - m.support.begin()) - 1];
  }
  static double quantile_of(const margin::Empirical &m, double t) {
    const auto it = std::lower_bound(m.cumulative.begin(), m.cumulative.end(), t);
    return m.support[static_cast<std::size_t>(it - m.cumulative.begin())];
  }
  static double cdf_of(const margin::Tabulated &m, double x) {
    if (x <= m.xs.front()) return 0.0;
    if (x >= m.xs.back()) return 1.0;
    const auto it = std::upper_bound(m.xs.begin(), m.xs.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - m.xs.begin());
    const double w = (x - m.xs[k - 1]) / (m.xs[k] - m.xs[k - 1]);
    return m.cdf[k - 1] + w * (m.cdf[k] - m.cdf[k - 1]);
  }
  static double quantile_of(const margin::Tabulated &m, double t) {
    // Bisection on the invariant F(lo) < t <= F(hi).
    double lo = m.xs.front();
    double hi = m.xs.back();
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (cdf_of(m, mid) >= t) hi = mid;
      else lo = mid;
      if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) break;
    }
    return hi;
  }
  static double cdf_of(const margin::Custom &m, double x) { return m.cdf(x); }
  static double quantile_of(const margin::Custom &m, double t) { return m.quantile(t); }

  Repr repr_;
};

inline double quantile_inverse(const MarginalModel &m, double t) { return m.quantile(t); }

// ---------------------------------------------------------------------------
// CopulaSpec

enum class CopulaKind { independence, comonotone, gaussian, grid };

inline std::string to_string(CopulaKind k) {
  switch (k) {
  case CopulaKind::independence: return "independence";
  case CopulaKind::comonotone: return "comonotone";
  case CopulaKind::gaussian: return "gaussian";
  case CopulaKind::grid: return "grid";
  }
  return "unknown";
}

namespace detail {

/// P(Z1 <= h, Z2 <= k) for standard normals with correlation rho, as the 1-D
/// integral of phi(z) * Phi((k - rho z) / sqrt(1 - rho^2)) over z <= h.
inline double bivariate_normal_cdf(double h, double k, double rho) {
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  auto integrand = [&](double z) { return normal_pdf(z) * normal_cdf((k - rho * z) / s); };
  const double lo = std::min(-10.0, h - 10.0);
  if (h <= lo) return 0.0;
  std::vector<double> cuts{lo};
  if (rho != 0.0) {
    const double step = k / rho;
    if (step > lo && step < h) cuts.push_back(step);
  }
  cuts.push_back(h);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += quad::adaptive(integrand, cuts[i], cuts[i + 1], 2e-14, 1e-13).value;
  }
  return total;
}

} // namespace detail

/// Joint CDF G(x,y) of (U_j, U_k) on (0,1)^2.
class CopulaSpec {
public:
  static CopulaSpec independence() { return CopulaSpec(CopulaKind::independence, 0.0); }
  static CopulaSpec comonotone() { return CopulaSpec(CopulaKind::comonotone, 1.0); }
  static CopulaSpec gaussian(double rho) {
    if (!(rho >= -1.0 && rho <= 1.0)) {
      throw ParameterError("gaussian copula: rho must lie in [-1,1]");
    }
    return CopulaSpec(CopulaKind::gaussian, rho);
  }
  /// values[i][j] = G(i/m, j/m) for i,j = 0..m; interpolated bilinearly.
  static CopulaSpec grid(std::vector<std::vector<double>> values) {
    const std::size_t m1 = values.size();
    if (m1 < 2) throw ParameterError("grid copula: need at least a 2x2 grid");
    for (const auto &row : values) {
      if (row.size() != m1) throw ParameterError("grid copula: grid must be square");
      for (double v : row) {
        if (!std::isfinite(v)) throw ParameterError("grid copula: non-finite value");
      }
    }
    CopulaSpec c(CopulaKind::grid, 0.0);
    c.grid_ = std::make_shared<const std::vector<std::vector<double>>>(std::move(values));
    c.warnings_ = c.check_grid();
    return c;
  }

  CopulaKind kind() const noexcept { return kind_; }
  double rho() const noexcept { return rho_; }
  const std::vector<std::string> &warnings() const noexcept { return warnings_; }
  const std::vector<std::vector<double>> *grid_values() const { return grid_.get(); }

  double operator()(double x, double y) const {
    if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0)) {
      throw DomainError("copula_cdf: arguments must lie in (0,1)");
    }
    return eval_unchecked(x, y);
  }

  /// Evaluation that also accepts the closed boundary (used on h/n grids).
  double eval_unchecked(double x, double y) const {
    if (x <= 0.0 || y <= 0.0) return 0.0;
    if (x >= 1.0) return std::min(y, 1.0);
    if (y >= 1.0) return x;
    switch (kind_) {
    case CopulaKind::independence: return x * y;
    case CopulaKind::comonotone: return std::min(x, y);
    case CopulaKind::gaussian: return gaussian_eval(x, y);
    case CopulaKind::grid: return grid_eval(x, y);
    }
    return 0.0;
  }

  /// G on the tensor grid xs x ys (xs sorted ascending), out[i][j] = G(xs[i], ys[j]).
  /// The Gaussian case integrates the conditional-normal density strip by strip
  /// along x, which is much cheaper than independent pointwise evaluations.
  std::vector<std::vector<double>> tensor(std::span<const double> xs,
                                          std::span<const double> ys) const {
    std::vector<std::vector<double>> out(xs.size(), std::vector<double>(ys.size()));
    if (kind_ != CopulaKind::gaussian || rho_ == 0.0 || std::abs(rho_) == 1.0) {
      for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) out[i][j] = eval_unchecked(xs[i], ys[j]);
      return out;
    }
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (xs[i] < xs[i - 1]) throw ParameterError("copula tensor: xs must be sorted");
    }
    const double s = std::sqrt((1.0 - rho_) * (1.0 + rho_));
    const auto &gl = quad::gauss_legendre(5);
    std::vector<double> zs(xs.size());
    std::size_t first_interior = 0;
    while (first_interior < xs.size() && xs[first_interior] <= 0.0) ++first_interior;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      zs[i] = (xs[i] > 0.0 && xs[i] < 1.0) ? normal_quantile(xs[i]) : 0.0;
    }
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double y = ys[j];
      if (y <= 0.0 || y >= 1.0) {
        for (std::size_t i = 0; i < xs.size(); ++i) out[i][j] = eval_unchecked(xs[i], y);
        continue;
      }
      const double b = normal_quantile(y);
      auto g = [&](double z) { return normal_pdf(z) * normal_cdf((b - rho_ * z) / s); };
      double acc = 0.0;
      double z_prev = 0.0;
      bool started = false;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] <= 0.0) {
          out[i][j] = 0.0;
          continue;
        }
        if (xs[i] >= 1.0) {
          out[i][j] = y;
          continue;
        }
        if (!started) {
          acc = detail::bivariate_normal_cdf(zs[i], b, rho_);
          started = true;
        } else {
          const double width = zs[i] - z_prev;
          const int pieces = std::max(1, static_cast<int>(std::ceil(width / (0.25 * s))));
          const double step = width / pieces;
          for (int p = 0; p < pieces; ++p) {
            const double c = z_prev + (p + 0.5) * step;
            const double h = 0.5 * step;
            double sum = 0.0;
            for (std::size_t q = 0; q < gl.nodes.size(); ++q) sum += gl.weights[q] * g(c + h * gl.nodes[q]);
            acc += h * sum;
          }
        }
        z_prev = zs[i];
        const double lo = std::max(xs[i] + y - 1.0, 0.0);
        out[i][j] = std::clamp(acc, lo, std::min(xs[i], y));
      }
    }
    return out;
  }

private:
  CopulaSpec(CopulaKind k, double rho) : kind_(k), rho_(rho) {}

  double gaussian_eval(double x, double y) const {
    if (rho_ == 0.0) return x * y;
    if (rho_ == 1.0) return std::min(x, y);
    if (rho_ == -1.0) return std::max(x + y - 1.0, 0.0);
    const double v = detail::bivariate_normal_cdf(normal_quantile(x), normal_quantile(y), rho_);
    return std::clamp(v, std::max(x + y - 1.0, 0.0), std::min(x, y));
  }

  double grid_eval(double x, double y) const {
    const auto &g = *grid_;
    const double m = static_cast<double>(g.size() - 1);
    const double fx = x * m, fy = y * m;
    const std::size_t i = std::min(static_cast<std::size_t>(fx), g.size() - 2);
    const std::size_t j = std::min(static_cast<std::size_t>(fy), g.size() - 2);
    const double tx = fx - static_cast<double>(i), ty = fy - static_cast<double>(j);
    return (1 - tx) * (1 - ty) * g[i][j] + tx * (1 - ty) * g[i + 1][j] +
           (1 - tx) * ty * g[i][j + 1] + tx * ty * g[i + 1][j + 1];
  }

  // Grid copulas only warn: bilinear interpolation can leave the Frechet band
  // by O(step^2) even when the nodes are exact.
  std::vector<std::string> check_grid() const {
    std::vector<std::string> w;
    const auto &g = *grid_;
    const double m = static_cast<double>(g.size() - 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double x = static_cast<double>(i) / m, y = static_cast<double>(j) / m;
        const double lo = std::max(x + y - 1.0, 0.0), hi = std::min(x, y);
        if (g[i][j] < lo - 1e-12 || g[i][j] > hi + 1e-12) {
          w.push_back("grid copula violates Frechet bounds at node (" + std::to_string(i) + "," +
                      std::to_string(j) + ")");
        }
      }
    }
    const std::size_t last = g.size() - 1;
    for (std::size_t i = 0; i <= last; ++i) {
      const double x = static_cast<double>(i) / m;
      if (std::abs(g[i][last] - x) > 1e-8 || std::abs(g[last][i] - x) > 1e-8) {
        w.push_back("grid copula margins are not uniform at index " + std::to_string(i));
        break;
      }
    }
    return w;
  }

  CopulaKind kind_;
  double rho_;
  std::shared_ptr<const std::vector<std::vector<double>>> grid_;
  std::vector<std::string> warnings_;
};

inline double copula_cdf(const CopulaSpec &c, double x, double y) { return c(x, y); }

/// Pairwise copulas G_{j,k} for a d-dimensional model. The (j,j) entry is
/// always the min copula. Missing pairs are an error unless the caller opted
/// into independence for them.
class CopulaSet {
public:
  CopulaSet(std::size_t dim, bool independence_for_missing = false)
      : dim_(dim), independence_for_missing_(independence_for_missing) {}

  /// The same copula for every pair.
  static CopulaSet uniform_pairs(std::size_t dim, const CopulaSpec &c) {
    CopulaSet s(dim);
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t k = j + 1; k < dim; ++k) s.set(j, k, c);
    return s;
  }

  void set(std::size_t j, std::size_t k, CopulaSpec c) {
    if (j >= dim_ || k >= dim_ || j == k) throw ParameterError("CopulaSet: bad pair index");
    if (j > k) throw ParameterError("CopulaSet: store pairs with j < k");
    pairs_.insert_or_assign({j, k}, std::move(c));
  }

  std::size_t dim() const noexcept { return dim_; }

  /// Copula of (U_j, U_k) with j < k.
  const CopulaSpec &pair(std::size_t j, std::size_t k) const {
    static const CopulaSpec independent = CopulaSpec::independence();
    const auto it = pairs_.find({j, k});
    if (it != pairs_.end()) return it->second;
    if (independence_for_missing_) return independent;
    throw ConfigError("no copula given for pair (" + std::to_string(j) + "," + std::to_string(k) +
                      ")");
  }

  /// G_{j,k}(x,y) for any ordered pair, including j == k.
  double eval(std::size_t j, std::size_t k, double x, double y) const {
    if (j == k) return std::min(x, y);
    if (j < k) return pair(j, k).eval_unchecked(x, y);
    return pair(k, j).eval_unchecked(y, x);
  }

private:
  std::size_t dim_;
  bool independence_for_missing_;
  std::map<std::pair<std::size_t, std::size_t>, CopulaSpec> pairs_;
};

// ---------------------------------------------------------------------------
// SampleBatch

struct Provenance {
  std::string generator = "external";
  std::uint64_t seed = 0;
};

/// n x d observations, row-major; rows are i.i.d. draws.
class SampleBatch {
public:
  SampleBatch(std::size_t n, std::size_t d, std::vector<double> data, Provenance p = {})
      : n_(n), d_(d), data_(std::move(data)), provenance_(std::move(p)) {
    if (data_.size() != n_ * d_) throw DimensionMismatch("batch data size is not n*d");
  }

  /// Build from columns of equal length.
  static SampleBatch from_columns(const std::vector<std::vector<double>> &cols, Provenance p = {}) {
    if (cols.empty()) throw DimensionMismatch("no columns");
    const std::size_t n = cols.front().size();
    std::vector<double> data(n * cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j].size() != n) throw DimensionMismatch("columns differ in length");
      for (std::size_t i = 0; i < n; ++i) data[i * cols.size() + j] = cols[j][i];
    }
    return SampleBatch(n, cols.size(), std::move(data), std::move(p));
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t d() const noexcept { return d_; }
  const Provenance &provenance() const noexcept { return provenance_; }
  std::span<const double> data() const noexcept { return data_; }

  double at(std::size_t i, std::size_t j) const { return data_[i * d_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> c(n_);
    for (std::size_t i = 0; i < n_; ++i) c[i] = data_[i * d_ + j];
    return c;
  }

  /// Column j sorted ascending (stable, so ties keep a deterministic order).
  std::vector<double> sorted_column(std::size_t j) const {
    auto c = column(j);
    std::stable_sort(c.begin(), c.end());
    return c;
  }

private:
  std::size_t n_, d_;
  std::vector<double> data_;
  Provenance provenance_;
};

} // namespace mqstat

#endif // MQSTAT_MODEL_HPP
