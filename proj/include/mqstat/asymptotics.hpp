#ifndef MQSTAT_ASYMPTOTICS_HPP
#define MQSTAT_ASYMPTOTICS_HPP

// Limiting variance of sqrt(n) (T_n - gamma_bar) by tensor quadrature, its
// finite-n double-sum counterpart, the per-observation linearization, and
// exact moments of uniform order statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mqstat/calculus.hpp"
#include "mqstat/errors.hpp"
#include "mqstat/model.hpp"
#include "mqstat/parallel.hpp"
#include "mqstat/quadrature.hpp"
#include "mqstat/quantile_stat.hpp"

namespace mqstat {

struct FiniteNCheck {
  std::size_t n = 0;
  double value = 0.0;
};

struct VarianceReport {
  double sigma2 = 0.0;
  /// Sum over j of the integral over 0 < x < y < 1 of x(1-y) psi_j(x) psi_j(y).
  double same_j_term = 0.0;
  /// Sum over j < k of the integral over (0,1)^2 of (G_jk(x,y) - xy) psi_j(x) psi_k(y).
  double cross_jk_term = 0.0;
  double quad_error = 0.0;
  /// sigma2 at the coarser refinement levels, finest last.
  std::vector<double> refinement_trace;
  bool clamped = false;
  std::vector<std::string> warnings;
  std::optional<FiniteNCheck> finite_n_check;
};

struct LinearizationTrace {
  std::vector<double> z;
  double statistic = 0.0;
  double gamma_bar = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

struct OrderStatVariance {
  double variance = 0.0;
  double bound = 0.0;
};

struct QuadratureOptions {
  /// Finest level: 2^level uniform panels per axis plus endpoint grading.
  int level = 10;
  /// Gauss-Legendre points per panel.
  int order = 3;
  unsigned threads = 1;
};

/// Grading toward 1 stops at 1 - 2^-40 when derivatives come from finite differences.
inline constexpr int kNumericGradingLimit = 40;

namespace detail {

struct Blocks {
  double same = 0.0;
  double cross = 0.0;
};

/// psi_j at each node, for every j.
inline std::vector<std::vector<double>> diag_derivatives_at(const FunctionSpec &f,
                                                            const Margins &margins,
                                                            std::span<const double> nodes) {
  std::vector<std::vector<double>> out(f.dim(), std::vector<double>(nodes.size()));
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    const auto g = psi_grad_diag(f, margins, nodes[a]);
    for (std::size_t j = 0; j < f.dim(); ++j) out[j][a] = g[j];
  }
  return out;
}

/// psi_j at the nodes of a graded rule together with the running integrals
/// cum[j][a] = int_0^{t_a} x psi_j(x) dx.
struct AxisValues {
  std::vector<std::vector<double>> psi;
  std::vector<std::vector<double>> cum;
};

inline AxisValues axis_values(const FunctionSpec &f, const Margins &margins,
                              const std::vector<double> &breaks, int order, unsigned threads) {
  const std::size_t d = f.dim();
  const std::size_t panels = breaks.size() - 1;
  const std::size_t q = static_cast<std::size_t>(order);
  const auto &gl = quad::gauss_legendre(order);
  AxisValues out;
  out.psi.assign(d, std::vector<double>(panels * q));
  out.cum.assign(d, std::vector<double>(panels * q));
  // Per panel: psi at its nodes, the partial integrals from the left edge to
  // each node, and the full-panel integral.
  std::vector<std::vector<double>> full(panels, std::vector<double>(d, 0.0));
  parallel_for(panels, threads, [&](std::size_t p) {
    const double lo = breaks[p], hi = breaks[p + 1];
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    for (std::size_t i = 0; i < q; ++i) {
      const double t = c + h * gl.nodes[i];
      const auto g = psi_grad_diag(f, margins, t);
      for (std::size_t j = 0; j < d; ++j) {
        out.psi[j][p * q + i] = g[j];
        full[p][j] += h * gl.weights[i] * t * g[j];
      }
      const double pc = 0.5 * (lo + t), ph = 0.5 * (t - lo);
      std::vector<double> part(d, 0.0);
      for (std::size_t r = 0; r < q; ++r) {
        const double s = pc + ph * gl.nodes[r];
        const auto gs = psi_grad_diag(f, margins, s);
        for (std::size_t j = 0; j < d; ++j) part[j] += ph * gl.weights[r] * s * gs[j];
      }
      for (std::size_t j = 0; j < d; ++j) out.cum[j][p * q + i] = part[j];
    }
  });
  for (std::size_t j = 0; j < d; ++j) {
    double before = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
      for (std::size_t i = 0; i < q; ++i) out.cum[j][p * q + i] += before;
      before += full[p][j];
    }
  }
  return out;
}

/// int_{x<y} x(1-y) [u(x) v(y) + v(x) u(y)], which also equals the square
/// integral of (min(x,y) - xy) u(x) v(y).
inline double triangle_form(const quad::NodeSet &ns, std::span<const double> u,
                            std::span<const double> u_cum, std::span<const double> v,
                            std::span<const double> v_cum) {
  double acc = 0.0;
  for (std::size_t a = 0; a < ns.nodes.size(); ++a) {
    acc += ns.weights[a] * (1.0 - ns.nodes[a]) * (v[a] * u_cum[a] + u[a] * v_cum[a]);
  }
  return acc;
}

/// Symmetrized variance blocks for the pair (fa, fb) at one refinement level:
///   same  = sum_j  int_{x<y} x(1-y) [a_j(x) b_j(y) + b_j(x) a_j(y)]
///   cross = sum_{j<k} int (G_jk - xy) [a_j(x) b_k(y) + b_j(x) a_k(y)]
/// The min kernel is handled through running integrals, so only smooth copulas
/// go through the tensor grid.
inline Blocks variance_blocks(const FunctionSpec &fa, const FunctionSpec &fb,
                              const Margins &margins, const CopulaSet &copulas, int level,
                              int order, unsigned threads) {
  const std::size_t d = fa.dim();
  // Central differences need 1 - x well above the spacing of doubles near 1.
  const bool analytic = fa.has_diag_grad() && fb.has_diag_grad();
  const int finest_upper = analytic ? 52 : kNumericGradingLimit;
  const auto breaks = quad::graded_breakpoints(level, finest_upper);
  const auto ns = quad::graded_nodes(level, order, finest_upper);
  const auto &t = ns.nodes;
  const auto &w = ns.weights;
  const std::size_t m = t.size();
  const bool same_fn = &fa == &fb;
  const auto av = axis_values(fa, margins, breaks, order, threads);
  const auto bv = same_fn ? av : axis_values(fb, margins, breaks, order, threads);

  Blocks out;
  for (std::size_t j = 0; j < d; ++j) {
    out.same += triangle_form(ns, av.psi[j], av.cum[j], bv.psi[j], bv.cum[j]);
  }

  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j + 1; k < d; ++k) {
      const CopulaSpec &c = copulas.pair(j, k);
      const bool indep = c.kind() == CopulaKind::independence ||
                         (c.kind() == CopulaKind::gaussian && c.rho() == 0.0);
      if (indep) continue;
      const bool comono = c.kind() == CopulaKind::comonotone ||
                          (c.kind() == CopulaKind::gaussian && c.rho() == 1.0);
      if (comono) {
        out.cross += triangle_form(ns, av.psi[j], av.cum[j], bv.psi[k], bv.cum[k]) +
                     triangle_form(ns, bv.psi[j], bv.cum[j], av.psi[k], av.cum[k]);
        continue;
      }
      const auto g = c.tensor(t, t);
      std::vector<double> part(m, 0.0);
      parallel_for(m, threads, [&](std::size_t ix) {
        double acc = 0.0;
        const double x = t[ix];
        for (std::size_t iy = 0; iy < m; ++iy) {
          const double kernel = g[ix][iy] - x * t[iy];
          acc += w[iy] * kernel * (av.psi[j][ix] * bv.psi[k][iy] + bv.psi[j][ix] * av.psi[k][iy]);
        }
        part[ix] = w[ix] * acc;
      });
      for (double p : part) out.cross += p;
    }
  }
  return out;
}

struct LeveledBlocks {
  Blocks finest;
  double error = 0.0;
  std::vector<double> trace;
};

inline LeveledBlocks refine_blocks(const FunctionSpec &fa, const FunctionSpec &fb,
                                   const Margins &margins, const CopulaSet &copulas,
                                   const QuadratureOptions &opt) {
  if (fa.dim() != fb.dim()) throw DimensionMismatch("functions differ in dimension");
  check_margins(fa, margins);
  if (copulas.dim() != fa.dim()) throw DimensionMismatch("copula set has wrong dimension");
  if (opt.level < 3) throw ParameterError("quadrature level must be at least 3");
  LeveledBlocks out;
  for (int level = opt.level - 2; level <= opt.level; ++level) {
    const Blocks b = variance_blocks(fa, fb, margins, copulas, level, opt.order, opt.threads);
    const double total = b.same + b.cross;
    out.trace.push_back(total);
    if (!std::isfinite(total)) {
      throw DivergenceError("variance quadrature produced a non-finite value", out.trace);
    }
    out.finest = b;
  }
  const double d1 = std::abs(out.trace[1] - out.trace[0]);
  const double d2 = std::abs(out.trace[2] - out.trace[1]);
  const double scale = std::max(1.0, std::abs(out.trace[2]));
  if (d2 > d1 && d2 > 1e-8 * scale) {
    throw DivergenceError("variance quadrature is not settling under refinement", out.trace);
  }
  out.error = d2;
  return out;
}

} // namespace detail

/// Limiting variance sigma^2 = 2 * same_j_term + 2 * cross_jk_term.
inline VarianceReport sigma_squared(const FunctionSpec &f, const Margins &margins,
                                    const CopulaSet &copulas, const QuadratureOptions &opt = {}) {
  const auto lb = detail::refine_blocks(f, f, margins, copulas, opt);
  VarianceReport r;
  // The symmetrized blocks with fa == fb are exactly twice the one-sided terms.
  r.same_j_term = 0.5 * lb.finest.same;
  r.cross_jk_term = 0.5 * lb.finest.cross;
  r.sigma2 = 2.0 * r.same_j_term + 2.0 * r.cross_jk_term;
  r.quad_error = lb.error;
  r.refinement_trace = lb.trace;
  if (r.sigma2 < 0.0) {
    if (-r.sigma2 <= r.quad_error) {
      r.warnings.push_back("sigma2 = " + std::to_string(r.sigma2) +
                           " is within quadrature error of 0; clamped to 0");
      r.sigma2 = 0.0;
      r.clamped = true;
    } else {
      throw EvaluationError("sigma2 is materially negative (" + std::to_string(r.sigma2) +
                            "); the pairwise copulas are probably inconsistent");
    }
  }
  return r;
}

struct CovarianceMatrix {
  std::size_t m = 0;
  /// Row-major m x m.
  std::vector<double> values;
  double quad_error = 0.0;

  double operator()(std::size_t r, std::size_t s) const { return values[r * m + s]; }
};

/// Limiting covariance of sqrt(n) (T_n(phi_r) - gamma_bar_r) across r.
inline CovarianceMatrix covariance_matrix(const std::vector<FunctionSpec> &fs,
                                          const Margins &margins, const CopulaSet &copulas,
                                          const QuadratureOptions &opt = {}) {
  if (fs.empty()) throw DimensionMismatch("covariance_matrix: no functions");
  for (const auto &f : fs) {
    if (f.dim() != fs.front().dim()) throw DimensionMismatch("functions differ in dimension");
  }
  CovarianceMatrix cm;
  cm.m = fs.size();
  cm.values.assign(cm.m * cm.m, 0.0);
  for (std::size_t r = 0; r < cm.m; ++r) {
    for (std::size_t s = r; s < cm.m; ++s) {
      const auto lb = detail::refine_blocks(fs[r], r == s ? fs[r] : fs[s], margins, copulas, opt);
      const double v = lb.finest.same + lb.finest.cross;
      cm.values[r * cm.m + s] = v;
      cm.values[s * cm.m + r] = v;
      cm.quad_error = std::max(cm.quad_error, lb.error);
    }
  }
  return cm;
}

/// Var(Z_{n,1}) = sum_{j,k} n^-2 sum_{h,i} (G_jk(h/n, i/n) - h i / n^2)
///                psi_j(h/(n+1)) psi_k(i/(n+1)).
inline double finite_n_variance(const FunctionSpec &f, const Margins &margins,
                                const CopulaSet &copulas, std::size_t n, unsigned threads = 1) {
  check_margins(f, margins);
  if (n < 2) throw DomainError("finite_n_variance: n must be at least 2");
  const std::size_t d = f.dim();
  const double nn = static_cast<double>(n);
  std::vector<double> grid(n), mu(n);
  for (std::size_t h = 0; h < n; ++h) {
    grid[h] = static_cast<double>(h + 1) / nn;
    mu[h] = static_cast<double>(h + 1) / (nn + 1.0);
  }
  const auto psi = detail::diag_derivatives_at(f, margins, mu);

  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    // min(h,i)/n - h i / n^2 for the (j,j) block.
    std::vector<double> rows(n, 0.0);
    parallel_for(n, threads, [&](std::size_t h) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += (std::min(grid[h], grid[i]) - grid[h] * grid[i]) * psi[j][i];
      }
      rows[h] = psi[j][h] * acc;
    });
    for (double r : rows) total += r;
  }
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j + 1; k < d; ++k) {
      const CopulaSpec &c = copulas.pair(j, k);
      if (c.kind() == CopulaKind::independence) continue;
      const auto g = c.tensor(grid, grid);
      std::vector<double> rows(n, 0.0);
      parallel_for(n, threads, [&](std::size_t h) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double kernel = g[h][i] - grid[h] * grid[i];
          // (j,k) and (k,j) blocks; G_kj(x,y) = G_jk(y,x).
          acc += kernel * (psi[j][h] * psi[k][i] + psi[k][h] * psi[j][i]);
        }
        rows[h] = acc;
      });
      for (double r : rows) total += r;
    }
  }
  return total / (nn * nn);
}

/// Per-observation linearization of sqrt(n) (T_n - gamma_bar). `uniforms` holds
/// the probability-integral-transformed data U = F_j(X) as an n x d batch.
/// Z uses W(x) = I(U <= x) - x. Since U_{n:i} - i/n is close to -W-bar(i/n),
/// the expansion is lhs = -n^-1/2 sum Z + o_P(1), so rhs carries that sign.
inline LinearizationTrace linearization(const SampleBatch &uniforms, const FunctionSpec &f,
                                        const Margins &margins,
                                        std::optional<double> known_gamma_bar = std::nullopt) {
  check_margins(f, margins);
  if (uniforms.d() != f.dim()) throw DimensionMismatch("batch and function differ in dimension");
  const std::size_t n = uniforms.n();
  const std::size_t d = f.dim();
  if (n == 0) throw DimensionMismatch("empty batch");
  for (double u : uniforms.data()) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("linearization: inputs must lie in (0,1)");
  }
  const double nn = static_cast<double>(n);

  LinearizationTrace tr;
  const auto sorted = sorted_columns(uniforms);
  std::vector<double> u(d);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) u[j] = sorted[j][i];
    sum += psi_eval(f, margins, u);
  }
  tr.statistic = sum / nn;
  tr.gamma_bar = known_gamma_bar ? *known_gamma_bar : gamma_bar(f, margins).value;
  tr.lhs = std::sqrt(nn) * (tr.statistic - tr.gamma_bar);

  // I(U <= i/n) = 1 exactly for i >= m(U), so each Z is a suffix sum of
  // psi_j(i/(n+1)) minus the constant sum_i (i/n) psi_j(i/(n+1)).
  std::vector<double> mu(n);
  for (std::size_t i = 0; i < n; ++i) mu[i] = static_cast<double>(i + 1) / (nn + 1.0);
  const auto psi = detail::diag_derivatives_at(f, margins, mu);
  std::vector<std::vector<double>> suffix(d, std::vector<double>(n + 2, 0.0));
  std::vector<double> centre(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = n; i >= 1; --i) suffix[j][i] = suffix[j][i + 1] + psi[j][i - 1];
    for (std::size_t i = 1; i <= n; ++i) centre[j] += (static_cast<double>(i) / nn) * psi[j][i - 1];
  }
  auto first_index = [&](double v) {
    // Smallest i in 1..n with v <= i/n, matching the floating-point comparison.
    auto m = static_cast<std::size_t>(std::ceil(v * nn));
    m = std::clamp<std::size_t>(m, 1, n);
    while (m > 1 && v <= static_cast<double>(m - 1) / nn) --m;
    while (m < n && !(v <= static_cast<double>(m) / nn)) ++m;
    return m;
  };
  tr.z.resize(n);
  double zsum = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      acc += suffix[j][first_index(uniforms.at(l, j))] - centre[j];
    }
    tr.z[l] = acc / nn;
    zsum += tr.z[l];
  }
  tr.rhs = -zsum / std::sqrt(nn);
  tr.residual = tr.lhs - tr.rhs;
  return tr;
}

/// Var(U_{n:i}) = mu (1 - mu) / (n + 2) with mu = i/(n+1), and the bound 1/n.
inline OrderStatVariance order_stat_variance(std::size_t n, std::size_t i) {
  if (n == 0 || i < 1 || i > n) throw DomainError("order_stat_variance: need 1 <= i <= n");
  const double nn = static_cast<double>(n);
  const double mu = static_cast<double>(i) / (nn + 1.0);
  return {mu * (1.0 - mu) / (nn + 2.0), 1.0 / nn};
}

/// n^-1/2 sum_i gamma(i/(n+1)) - sqrt(n) gamma_bar.
inline double riemann_gap(const FunctionSpec &f, const Margins &margins, std::size_t n,
                          std::optional<double> known_gamma_bar = std::nullopt) {
  if (n == 0) throw DomainError("riemann_gap: n must be positive");
  const double gb = known_gamma_bar ? *known_gamma_bar : gamma_bar(f, margins).value;
  const double nn = static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i) sum += gamma_eval(f, margins, static_cast<double>(i) / (nn + 1.0));
  return sum / std::sqrt(nn) - std::sqrt(nn) * gb;
}

} // namespace mqstat

#endif // MQSTAT_ASYMPTOTICS_HPP
