#ifndef MQSTAT_QUADRATURE_HPP
#define MQSTAT_QUADRATURE_HPP

// One-dimensional quadrature on (0,1) with geometric grading toward both
// endpoints, plus composite Gauss-Legendre node sets for tensor rules.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "mqstat/errors.hpp"

namespace mqstat::quad {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

/// Gauss-Legendre rule of order n on [-1,1], by Newton iteration on P_n.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[n - 1 - i] = x;
      weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

inline const GaussLegendre &gauss_legendre(int n) {
  static const std::array<GaussLegendre, 3> cache{GaussLegendre(3), GaussLegendre(4),
                                                  GaussLegendre(5)};
  if (n >= 3 && n <= 5) return cache[static_cast<std::size_t>(n - 3)];
  static thread_local std::deque<GaussLegendre> extra;
  for (const auto &g : extra) {
    if (static_cast<int>(g.nodes.size()) == n) return g;
  }
  extra.emplace_back(n);
  return extra.back();
}

namespace detail {
inline constexpr std::array<double, 8> kXgk{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
} // namespace detail

/// 15-point Gauss-Kronrod on [a,b]; error is |K15 - G7|.
template <class F> Estimate gk15(F &&f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * detail::kWgk[7];
  double gauss = fc * detail::kWg[3];
  for (std::size_t k = 0; k < 7; ++k) {
    const double dx = h * detail::kXgk[k];
    const double sum = f(c - dx) + f(c + dx);
    kronrod += detail::kWgk[k] * sum;
    if (k % 2 == 1) gauss += detail::kWg[k / 2] * sum;
  }
  return {kronrod * h, std::abs((kronrod - gauss) * h)};
}

/// Globally adaptive Gauss-Kronrod on [a,b]: bisect the interval with the
/// largest error until the total error is below max(abs_tol, rel_tol*|I|).
template <class F>
Estimate adaptive(F &&f, double a, double b, double abs_tol, double rel_tol = 0.0,
                  int max_intervals = 2000) {
  struct Piece {
    double a, b;
    Estimate est;
    bool operator<(const Piece &o) const { return est.error < o.est.error; }
  };
  std::priority_queue<Piece> heap;
  Estimate first = gk15(f, a, b);
  heap.push({a, b, first});
  double value = first.value;
  double error = first.error;
  int count = 1;
  while (error > std::max(abs_tol, rel_tol * std::abs(value)) && count < max_intervals) {
    Piece top = heap.top();
    const double mid = 0.5 * (top.a + top.b);
    if (!(mid > top.a && mid < top.b)) break;
    heap.pop();
    const Estimate left = gk15(f, top.a, mid);
    const Estimate right = gk15(f, mid, top.b);
    value += left.value + right.value - top.est.value;
    error += left.error + right.error - top.est.error;
    heap.push({top.a, mid, left});
    heap.push({mid, top.b, right});
    ++count;
  }
  // Re-sum to shed the drift of the running totals.
  value = 0.0;
  error = 0.0;
  std::vector<Piece> pieces;
  while (!heap.empty()) {
    pieces.push_back(heap.top());
    heap.pop();
  }
  std::sort(pieces.begin(), pieces.end(), [](const Piece &x, const Piece &y) { return x.a < y.a; });
  for (const auto &p : pieces) {
    value += p.est.value;
    error += p.est.error;
  }
  return {value, error};
}

/// Number of halvings toward 0 (ratio 1/2).
inline constexpr int kMaxGradingLevels = 60;

/// Halvings toward 1 that stay representable: 1 - 2^-k is exact for k <= 53.
inline int upper_grading_levels(int already, int finest = 52) {
  return std::max(0, std::min({kMaxGradingLevels, 52 - already, finest - already}));
}

/// Panel breakpoints for level L: 2^L uniform panels on [0,1], with the first
/// and last panels further split geometrically (ratio 1/2) toward the ends.
/// The innermost panel next to 0 is kept; next to 1 it is dropped because its
/// Gauss nodes round to 1.0 in double precision. `finest_upper` caps the
/// grading toward 1 at 1 - 2^-finest_upper.
inline std::vector<double> graded_breakpoints(int level, int finest_upper = 52) {
  const double width = std::ldexp(1.0, -level);
  const int n_uniform = 1 << level;
  std::vector<double> pts;
  pts.push_back(0.0);
  for (int k = kMaxGradingLevels; k >= 1; --k) pts.push_back(std::ldexp(width, -k));
  for (int i = 1; i < n_uniform; ++i) pts.push_back(i * width);
  const int up = upper_grading_levels(level, finest_upper);
  for (int k = 1; k <= up; ++k) pts.push_back(1.0 - std::ldexp(width, -k));
  return pts;
}

struct NodeSet {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Composite Gauss-Legendre nodes of order q over the graded panels of `level`.
inline NodeSet graded_nodes(int level, int q, int finest_upper = 52) {
  const auto pts = graded_breakpoints(level, finest_upper);
  const auto &gl = gauss_legendre(q);
  NodeSet out;
  out.nodes.reserve((pts.size() - 1) * static_cast<std::size_t>(q));
  out.weights.reserve(out.nodes.capacity());
  for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
    const double c = 0.5 * (pts[p] + pts[p + 1]);
    const double h = 0.5 * (pts[p + 1] - pts[p]);
    for (int i = 0; i < q; ++i) {
      out.nodes.push_back(c + h * gl.nodes[static_cast<std::size_t>(i)]);
      out.weights.push_back(h * gl.weights[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

struct UnitIntervalResult {
  double value = 0.0;
  double error = 0.0;
  /// Contributions of the geometric panels next to 0 (outermost first) and next to 1.
  std::vector<double> lower_trace;
  std::vector<double> upper_trace;
};

namespace detail {
// Geometric tail beyond the last graded panel, from the ratio of the last two
// panel contributions. Returns infinity when the contributions do not shrink.
inline double tail_bound(const std::vector<double> &trace) {
  const std::size_t n = trace.size();
  if (n < 2) return 0.0;
  const double last = std::abs(trace[n - 1]);
  const double prev = std::abs(trace[n - 2]);
  if (last == 0.0) return 0.0;
  if (prev == 0.0) return last;
  const double r = last / prev;
  if (r >= 1.0) return std::numeric_limits<double>::infinity();
  return last * r / (1.0 - r);
}

inline bool not_shrinking(const std::vector<double> &trace, std::size_t window) {
  const std::size_t n = trace.size();
  if (n < window + 1) return false;
  // A ratio this close to 1 means a log-type blow-up; rounding alone can make
  // equal panels look slightly smaller.
  for (std::size_t i = n - window; i < n; ++i) {
    if (std::abs(trace[i]) < 0.99 * std::abs(trace[i - 1])) return false;
  }
  return std::abs(trace.back()) > 0.0;
}
} // namespace detail

/// Integral of f over (0,1) for integrands that may blow up at either end.
/// (0,1/2] is split into [2^-(k+1), 2^-k] for k = 1..60 and [1/2,1) likewise
/// toward 1; each panel is integrated adaptively. Throws DivergenceError when
/// the endpoint panel contributions stop shrinking.
template <class F>
UnitIntervalResult integrate_unit(F &&f, double abs_tol = 1e-11, double rel_tol = 1e-13) {
  UnitIntervalResult res;
  const int upper_levels = upper_grading_levels(0) - 1; // last edge 1 - 2^-52
  const double panel_tol = abs_tol / (kMaxGradingLevels + upper_levels + 2);

  auto panel = [&](double a, double b) {
    Estimate e = adaptive(f, a, b, panel_tol, rel_tol, 400);
    if (!std::isfinite(e.value)) {
      throw EvaluationError("integrand not finite on [" + std::to_string(a) + ", " +
                            std::to_string(b) + "]");
    }
    res.value += e.value;
    res.error += e.error;
    return e.value;
  };

  for (int k = 1; k <= kMaxGradingLevels; ++k) {
    res.lower_trace.push_back(panel(std::ldexp(1.0, -k - 1), std::ldexp(1.0, -k)));
  }
  res.lower_trace.push_back(panel(0.0, std::ldexp(1.0, -kMaxGradingLevels - 1)));
  for (int k = 1; k <= upper_levels; ++k) {
    res.upper_trace.push_back(panel(1.0 - std::ldexp(1.0, -k), 1.0 - std::ldexp(1.0, -k - 1)));
  }

  std::vector<double> lower_geo(res.lower_trace.begin(), res.lower_trace.end() - 1);
  for (const auto *trace : {&lower_geo, &res.upper_trace}) {
    if (detail::not_shrinking(*trace, 4)) {
      std::vector<double> all = res.lower_trace;
      all.insert(all.end(), res.upper_trace.begin(), res.upper_trace.end());
      throw DivergenceError("endpoint panel contributions are not shrinking", all);
    }
  }
  res.error += detail::tail_bound(res.upper_trace);
  if (!std::isfinite(res.error)) {
    std::vector<double> all = res.lower_trace;
    all.insert(all.end(), res.upper_trace.begin(), res.upper_trace.end());
    throw DivergenceError("endpoint panel contributions are not shrinking", all);
  }
  return res;
}

} // namespace mqstat::quad

#endif // MQSTAT_QUADRATURE_HPP
