#ifndef MQSTAT_FUNCTIONS_HPP
#define MQSTAT_FUNCTIONS_HPP

// Built-in test functions phi. Analytic diagonal derivatives are attached only
// through the *_on_uniform factories, where psi coincides with phi.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mqstat/errors.hpp"
#include "mqstat/model.hpp"

namespace mqstat::functions {

/// phi(x) = prod_j x_j^alpha_j.
inline FunctionSpec monomial(std::vector<double> alpha) {
  if (alpha.empty()) throw ParameterError("monomial: need at least one exponent");
  for (double a : alpha) {
    if (!std::isfinite(a)) throw ParameterError("monomial: exponents must be finite");
  }
  const std::size_t d = alpha.size();
  return FunctionSpec(
      d,
      [alpha](std::span<const double> x) {
        double v = 1.0;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
          v *= alpha[j] == 1.0 ? x[j] : std::pow(x[j], alpha[j]);
        }
        return v;
      },
      "monomial");
}

/// Monomial with psi_j(x) = alpha_j x^(M-1) and the matching Hessian, valid on
/// standard uniform margins.
inline FunctionSpec monomial_on_uniform(std::vector<double> alpha) {
  const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  const std::size_t d = alpha.size();
  return monomial(alpha)
      .with_diag_grad([alpha, total](double x) {
        std::vector<double> g(alpha.size());
        const double p = std::pow(x, total - 1.0);
        for (std::size_t j = 0; j < alpha.size(); ++j) g[j] = alpha[j] * p;
        return g;
      })
      .with_diag_hess([alpha, total, d](double x) {
        std::vector<double> h(d * d);
        const double p = std::pow(x, total - 2.0);
        for (std::size_t j = 0; j < d; ++j)
          for (std::size_t k = 0; k < d; ++k)
            h[j * d + k] = (j == k ? alpha[j] * (alpha[j] - 1.0) : alpha[j] * alpha[k]) * p;
        return h;
      });
}

inline FunctionSpec product(std::size_t d) { return monomial(std::vector<double>(d, 1.0)); }

inline FunctionSpec sum(std::size_t d) {
  if (d == 0) throw ParameterError("sum: dimension must be positive");
  return FunctionSpec(
      d,
      [](std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0); }, "sum");
}

inline FunctionSpec sum_on_uniform(std::size_t d) {
  return sum(d)
      .with_diag_grad([d](double) { return std::vector<double>(d, 1.0); })
      .with_diag_hess([d](double) { return std::vector<double>(d * d, 0.0); });
}

inline FunctionSpec identity() { return sum(1); }

inline FunctionSpec square() {
  return FunctionSpec(1, [](std::span<const double> x) { return x[0] * x[0]; }, "square");
}

inline FunctionSpec square_on_uniform() {
  return square()
      .with_diag_grad([](double x) { return std::vector<double>{2.0 * x}; })
      .with_diag_hess([](double) { return std::vector<double>{2.0}; });
}

inline FunctionSpec constant(std::size_t d, double c) {
  return FunctionSpec(d, [c](std::span<const double>) { return c; }, "constant");
}

/// 1 on the diagonal x == y, 0 elsewhere. Discontinuous on the diagonal.
inline FunctionSpec diagonal_indicator() {
  return FunctionSpec(
      2, [](std::span<const double> x) { return x[0] == x[1] ? 1.0 : 0.0; },
      "diagonal-indicator");
}

/// phi(x,y) = s^-alpha (1-s)^-alpha with s = (x+y)/2.
inline FunctionSpec endpoint_power(double alpha) {
  if (!(std::isfinite(alpha) && alpha > 0.0)) {
    throw ParameterError("endpoint power: alpha must be positive");
  }
  return FunctionSpec(
      2,
      [alpha](std::span<const double> x) {
        const double s = 0.5 * (x[0] + x[1]);
        return std::pow(s * (1.0 - s), -alpha);
      },
      "endpoint-power");
}

inline FunctionSpec endpoint_power_on_uniform(double alpha) {
  // With g(s) = (s(1-s))^-alpha: psi_j = g'/2 and every second partial is g''/4.
  return endpoint_power(alpha)
      .with_diag_grad([alpha](double x) {
        const double q = x * (1.0 - x);
        const double g1 = -alpha * std::pow(q, -alpha - 1.0) * (1.0 - 2.0 * x);
        return std::vector<double>(2, 0.5 * g1);
      })
      .with_diag_hess([alpha](double x) {
        const double q = x * (1.0 - x);
        const double t = 1.0 - 2.0 * x;
        const double g2 = alpha * (alpha + 1.0) * std::pow(q, -alpha - 2.0) * t * t +
                          2.0 * alpha * std::pow(q, -alpha - 1.0);
        return std::vector<double>(4, 0.25 * g2);
      });
}

// ---------------------------------------------------------------------------
// Growth counterexample on (0,1)^2.
//
// S~_m = (m/(m+1), 1)^2 and S_m = S~_{m-1} \ S~_m. L_m is the inner boundary
// of S_m (two segments at m/(m+1)) plus the diagonal piece inside S_m. Inside
// S_m the value is m^3, except within eps_m of L_m where it falls linearly to
// 1 at L_m.

namespace detail {

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::hypot(dx, dy);
}

} // namespace detail

inline constexpr double kGrowthExampleMaxShell = 1e6;

/// Index m of the shell S_m containing (x,y).
inline double growth_example_shell(double x, double y) {
  const double t = std::min(x, y);
  return std::max(1.0, std::ceil(t / (1.0 - t)));
}

/// Total length of L_m: two segments of length 1/(m+1) and a diagonal piece
/// of length sqrt(2)/(m(m+1)).
inline double growth_example_boundary_length(double m) {
  return 2.0 / (m + 1.0) + std::numbers::sqrt2 / (m * (m + 1.0));
}

/// Strip half-width eps_m = m^-8 / (2 len(L_m)).
inline double growth_example_eps(double m) {
  return std::pow(m, -8.0) / (2.0 * growth_example_boundary_length(m));
}

inline double growth_example_value(double x, double y) {
  if (x == y) return 1.0;
  const double m = growth_example_shell(x, y);
  const double top = m * m * m;
  if (m > kGrowthExampleMaxShell) return top;
  const double a = m / (m + 1.0);
  const double b = (m - 1.0) / m;
  const double dist = std::min({detail::segment_distance(x, y, a, a, a, 1.0),
                                detail::segment_distance(x, y, a, a, 1.0, a),
                                detail::segment_distance(x, y, b, b, a, a)});
  const double eps = growth_example_eps(m);
  return 1.0 + (top - 1.0) * std::min(1.0, dist / eps);
}

inline FunctionSpec growth_example() {
  return FunctionSpec(
      2, [](std::span<const double> x) { return growth_example_value(x[0], x[1]); },
      "growth-example");
}

} // namespace mqstat::functions

#endif // MQSTAT_FUNCTIONS_HPP
