#ifndef MQSTAT_CALCULUS_HPP
#define MQSTAT_CALCULUS_HPP

// psi = phi o (F_1^-1, ..., F_d^-1), its diagonal derivatives, and numerical
// probes of the growth conditions on psi.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mqstat/errors.hpp"
#include "mqstat/model.hpp"
#include "mqstat/quantile_stat.hpp"

namespace mqstat {

/// Fixed thresholds of the three-valued probe verdicts.
namespace probe_config {
inline constexpr double converged_rel_spread = 0.01;
inline constexpr double diverging_growth = 0.10;
inline constexpr int consecutive_refinements = 3;
inline constexpr double c2_stable_growth = 0.05;
inline constexpr int c3_min_log2_n = 8;
inline constexpr int c3_max_log2_n = 18;
inline constexpr std::size_t c2_base_points = 10000;
inline constexpr int c2_doublings = 3;
} // namespace probe_config

enum class Verdict { converged, diverging, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
  case Verdict::converged: return "converged";
  case Verdict::diverging: return "diverging";
  case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

struct ConditionProbeReport {
  std::string condition; // "C2", "C3-grad" or "C3-hess"
  std::vector<std::size_t> grid_sizes;
  std::vector<double> values;
  /// Aitken-accelerated values (C3 only; empty when increments do not contract).
  std::vector<double> extrapolated;
  Verdict verdict = Verdict::inconclusive;
  std::optional<double> sup_ratio;
  std::optional<double> c0;
  std::size_t j = 0;
  std::size_t k = 0;
};

struct C3Probe {
  ConditionProbeReport grad;
  ConditionProbeReport hess;
};

// ---------------------------------------------------------------------------

/// psi(u) = phi(F_1^-1(u_1), ..., F_d^-1(u_d)).
inline double psi_eval(const FunctionSpec &f, const Margins &margins, std::span<const double> u) {
  check_margins(f, margins);
  if (u.size() != f.dim()) throw DimensionMismatch("psi_eval: point has wrong dimension");
  std::vector<double> x(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (!(u[j] > 0.0 && u[j] < 1.0)) throw DomainError("psi_eval: u must lie in (0,1)^d");
    x[j] = margins[j].quantile(u[j]);
  }
  const double v = f(x);
  if (!std::isfinite(v)) throw EvaluationError("psi is not finite");
  return v;
}

namespace detail {

inline constexpr double kFirstStepEndpointFraction = 1e-3;
inline constexpr double kSecondStepEndpointFraction = 1e-2;

/// Central-difference step for first derivatives at x in (0,1): the
/// cube-root-of-epsilon step, shrunk to a fixed fraction of the distance to
/// the nearer endpoint.
inline double first_step(double x) {
  const double h0 = std::max(1e-6, std::cbrt(std::numeric_limits<double>::epsilon()) *
                                       std::max(1.0, std::abs(x)));
  return std::min(h0, kFirstStepEndpointFraction * std::min(x, 1.0 - x));
}

inline double second_step(double x) {
  const double h0 = std::sqrt(std::max(1e-6, std::cbrt(std::numeric_limits<double>::epsilon()))) *
                    std::max(1.0, std::abs(x));
  return std::min(h0, kSecondStepEndpointFraction * std::min(x, 1.0 - x));
}

/// Representable x-h and x+h, both distinct from x.
inline std::pair<double, double> stencil(double x, double h) {
  const double lo = x - h, hi = x + h;
  if (!(x > 0.0 && x < 1.0)) throw DomainError("derivative point must lie in (0,1)");
  if (!(lo < x && hi > x && lo > 0.0 && hi < 1.0)) {
    throw DomainError("finite-difference step underflows near the endpoint at x = " +
                      std::to_string(x));
  }
  return {lo, hi};
}

} // namespace detail

/// psi_j(x) = d psi / d u_j at (x, ..., x).
inline double psi_j_diag(const FunctionSpec &f, const Margins &margins, double x, std::size_t j) {
  if (j >= f.dim()) throw DimensionMismatch("psi_j_diag: index out of range");
  if (!(x > 0.0 && x < 1.0)) throw DomainError("psi_j_diag: x must lie in (0,1)");
  if (f.has_diag_grad()) {
    const auto g = f.diag_grad(x);
    if (g.size() != f.dim()) throw DimensionMismatch("diag_grad returned wrong length");
    return g[j];
  }
  const auto [lo, hi] = detail::stencil(x, detail::first_step(x));
  std::vector<double> u(f.dim(), x);
  u[j] = hi;
  const double up = psi_eval(f, margins, u);
  u[j] = lo;
  const double down = psi_eval(f, margins, u);
  return (up - down) / (hi - lo);
}

/// All d diagonal first derivatives at x.
inline std::vector<double> psi_grad_diag(const FunctionSpec &f, const Margins &margins, double x) {
  if (f.has_diag_grad()) return f.diag_grad(x);
  std::vector<double> g(f.dim());
  for (std::size_t j = 0; j < f.dim(); ++j) g[j] = psi_j_diag(f, margins, x, j);
  return g;
}

/// Second derivative d^2 psi / du_j du_k at (x, ..., x).
inline double psi_jk_diag(const FunctionSpec &f, const Margins &margins, double x, std::size_t j,
                          std::size_t k) {
  if (j >= f.dim() || k >= f.dim()) throw DimensionMismatch("psi_jk_diag: index out of range");
  if (!(x > 0.0 && x < 1.0)) throw DomainError("psi_jk_diag: x must lie in (0,1)");
  if (f.has_diag_hess()) {
    const auto h = f.diag_hess(x);
    if (h.size() != f.dim() * f.dim()) throw DimensionMismatch("diag_hess returned wrong size");
    return h[j * f.dim() + k];
  }
  const double step = detail::second_step(x);
  const auto [lo, hi] = detail::stencil(x, step);
  const double h = 0.5 * (hi - lo);
  std::vector<double> u(f.dim(), x);
  if (j == k) {
    u[j] = hi;
    const double up = psi_eval(f, margins, u);
    u[j] = lo;
    const double down = psi_eval(f, margins, u);
    u[j] = x;
    const double mid = psi_eval(f, margins, u);
    return (up - 2.0 * mid + down) / (h * h);
  }
  auto at = [&](double a, double b) {
    u[j] = a;
    u[k] = b;
    return psi_eval(f, margins, u);
  };
  return (at(hi, hi) - at(hi, lo) - at(lo, hi) + at(lo, lo)) / (4.0 * h * h);
}

// ---------------------------------------------------------------------------
// Probes

namespace detail {

inline double rel_spread(std::span<const double> v) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double scale = std::max(std::abs(*mn), std::abs(*mx));
  if (scale == 0.0) return 0.0;
  return (*mx - *mn) / scale;
}

/// Aitken delta-squared transform of s; empty unless the last increments
/// shrink geometrically (0 < ratio < 1).
inline std::vector<double> aitken(std::span<const double> s, int need_contracting) {
  const std::size_t n = s.size();
  if (n < 3) return {};
  std::vector<double> d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) d[i] = s[i + 1] - s[i];
  const std::size_t start = d.size() > static_cast<std::size_t>(need_contracting)
                                ? d.size() - static_cast<std::size_t>(need_contracting)
                                : 1;
  for (std::size_t i = std::max<std::size_t>(start, 1); i < d.size(); ++i) {
    if (d[i - 1] == 0.0) return {};
    const double r = d[i] / d[i - 1];
    if (!(r > 0.0 && r < 1.0)) return {};
  }
  std::vector<double> a;
  for (std::size_t i = 0; i + 2 < n; ++i) {
    const double denom = d[i + 1] - d[i];
    a.push_back(denom == 0.0 ? s[i + 2] : s[i + 2] - d[i + 1] * d[i + 1] / denom);
  }
  return a;
}

/// Verdict for a sequence of Riemann sums on the dyadic grid 2^8, 2^9, ...
/// Growth is judged per refinement n -> 4n, agreement on the raw sums at
/// that spacing or on the Aitken-accelerated sums of the full dyadic grid.
inline Verdict classify_riemann(std::span<const double> dyadic, std::vector<double> &extrapolated) {
  using namespace probe_config;
  std::vector<double> coarse;
  for (std::size_t i = 0; i < dyadic.size(); i += 2) coarse.push_back(dyadic[i]);
  const std::size_t m = coarse.size();
  const auto refinements = static_cast<std::size_t>(consecutive_refinements);

  bool growing = m >= refinements + 1;
  for (std::size_t i = m - refinements; growing && i < m; ++i) {
    growing = coarse[i - 1] > 0.0 && coarse[i] >= (1.0 + diverging_growth) * coarse[i - 1];
  }
  extrapolated = aitken(dyadic, consecutive_refinements + 1);
  if (growing) return Verdict::diverging;

  if (m >= refinements &&
      rel_spread(std::span(coarse).last(refinements)) <= converged_rel_spread) {
    return Verdict::converged;
  }
  if (extrapolated.size() >= refinements &&
      rel_spread(std::span(extrapolated).last(refinements)) <= converged_rel_spread) {
    return Verdict::converged;
  }
  return Verdict::inconclusive;
}

/// Radical-inverse Halton point (index >= 1) in the first d prime bases.
inline void halton(std::size_t index, std::span<double> out) {
  static constexpr std::array<unsigned, 12> primes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (std::size_t j = 0; j < out.size(); ++j) {
    const unsigned b = primes[j % primes.size()];
    double f = 1.0, r = 0.0;
    std::size_t i = index;
    while (i > 0) {
      f /= b;
      r += f * static_cast<double>(i % b);
      i /= b;
    }
    out[j] = r;
  }
}

} // namespace detail

/// Riemann sums of the two growth conditions at mu = i/(n+1) for
/// n = 2^8 .. 2^18, with a convergence verdict for each.
inline C3Probe probe_c3(const FunctionSpec &f, const Margins &margins, std::size_t j,
                        std::size_t k) {
  check_margins(f, margins);
  if (j >= f.dim() || k >= f.dim()) throw DimensionMismatch("probe_c3: index out of range");
  C3Probe out;
  out.grad.condition = "C3-grad";
  out.hess.condition = "C3-hess";
  out.grad.j = out.hess.j = j;
  out.grad.k = out.hess.k = k;
  for (int p = probe_config::c3_min_log2_n; p <= probe_config::c3_max_log2_n; ++p) {
    const std::size_t n = std::size_t{1} << p;
    double grad_sum = 0.0, hess_sum = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      const double mu = static_cast<double>(i) / static_cast<double>(n + 1);
      const double w = std::pow(mu * (1.0 - mu), 1.5);
      double g = 0.0, h = 0.0;
      try {
        g = psi_j_diag(f, margins, mu, j);
        h = psi_jk_diag(f, margins, mu, j, k);
      } catch (const std::exception &e) {
        throw EvaluationError(std::string("probe_c3: derivative failed at grid point: ") + e.what(),
                              i);
      }
      if (!std::isfinite(g) || !std::isfinite(h)) {
        throw EvaluationError("probe_c3: non-finite derivative at mu = " + std::to_string(mu), i);
      }
      grad_sum += w * g * g;
      hess_sum += w * std::abs(h);
    }
    out.grad.grid_sizes.push_back(n);
    out.hess.grid_sizes.push_back(n);
    out.grad.values.push_back(grad_sum / static_cast<double>(n));
    out.hess.values.push_back(hess_sum / static_cast<double>(n));
  }
  out.grad.verdict = detail::classify_riemann(out.grad.values, out.grad.extrapolated);
  out.hess.verdict = detail::classify_riemann(out.hess.values, out.hess.extrapolated);
  return out;
}

/// Sup of |psi(x)| / (1 + sum_j |gamma(x_j)|) over quasi-random points in the
/// corner boxes (0,c0)^d and (1-c0,1)^d, at 10^4 points and three doublings.
inline ConditionProbeReport probe_c2(const FunctionSpec &f, const Margins &margins, double c0) {
  check_margins(f, margins);
  if (!(c0 > 0.0 && c0 < 0.5)) throw DomainError("probe_c2: c0 must lie in (0, 1/2)");
  ConditionProbeReport r;
  r.condition = "C2";
  r.c0 = c0;
  const std::size_t d = f.dim();
  std::vector<double> h(d), u(d);
  double sup = 0.0;
  std::size_t used = 0;
  for (int level = 0; level <= probe_config::c2_doublings; ++level) {
    const std::size_t target = probe_config::c2_base_points << level;
    // Points alternate between the lower and the upper corner box.
    for (; used < target; ++used) {
      detail::halton(used / 2 + 1, h);
      const bool upper = used % 2 == 1;
      for (std::size_t j = 0; j < d; ++j) u[j] = upper ? 1.0 - c0 * h[j] : c0 * h[j];
      double denom = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> diag(d, u[j]);
        denom += std::abs(psi_eval(f, margins, diag));
      }
      sup = std::max(sup, std::abs(psi_eval(f, margins, u)) / denom);
    }
    r.grid_sizes.push_back(target);
    r.values.push_back(sup);
  }
  r.sup_ratio = sup;
  // The sup of a quasi-random sample grows in jumps, so a stall at one
  // doubling does not rule out divergence; judge the overall growth instead.
  const std::size_t m = r.values.size();
  const double overall = std::pow(1.0 + probe_config::diverging_growth, static_cast<double>(m - 1));
  if (r.values[m - 1] <= (1.0 + probe_config::c2_stable_growth) * r.values[m - 2]) {
    r.verdict = Verdict::converged;
  } else if (r.values.front() > 0.0 && r.values.back() >= overall * r.values.front()) {
    r.verdict = Verdict::diverging;
  } else {
    r.verdict = Verdict::inconclusive;
  }
  return r;
}

/// Largest |analytic - finite difference| / (1 + |analytic|) of the diagonal
/// gradient over `points`; 0 when f carries no analytic gradient.
inline double diag_grad_mismatch(const FunctionSpec &f, const Margins &margins,
                                 std::span<const double> points) {
  if (!f.has_diag_grad()) return 0.0;
  const FunctionSpec numeric = f.numeric_only();
  double worst = 0.0;
  for (double x : points) {
    const auto a = f.diag_grad(x);
    for (std::size_t j = 0; j < f.dim(); ++j) {
      const double fd = psi_j_diag(numeric, margins, x, j);
      worst = std::max(worst, std::abs(a[j] - fd) / (1.0 + std::abs(a[j])));
    }
  }
  return worst;
}

} // namespace mqstat

#endif // MQSTAT_CALCULUS_HPP
