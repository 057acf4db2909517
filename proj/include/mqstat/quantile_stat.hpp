#ifndef MQSTAT_QUANTILE_STAT_HPP
#define MQSTAT_QUANTILE_STAT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mqstat/errors.hpp"
#include "mqstat/model.hpp"
#include "mqstat/quadrature.hpp"

namespace mqstat {

using Margins = std::vector<MarginalModel>;

struct StatisticResult {
  double value = 0.0;
  std::size_t n = 0;
  std::optional<double> gamma_bar;
  std::optional<double> gamma_bar_error;
  /// sqrt(n) * (value - gamma_bar), present exactly when gamma_bar is.
  std::optional<double> centered_scaled;
};

struct GammaBar {
  double value = 0.0;
  double error = 0.0;
};

struct SampleBounds {
  double lower = 0.0;
  double upper = 0.0;
};

inline void check_margins(const FunctionSpec &f, const Margins &margins) {
  if (margins.size() != f.dim()) {
    throw DimensionMismatch("function has dimension " + std::to_string(f.dim()) + " but " +
                            std::to_string(margins.size()) + " margins were given");
  }
}

/// (1/n) sum_i phi(i-th order statistic of each column), given columns that
/// are already sorted ascending.
inline double statistic_from_sorted(const std::vector<std::vector<double>> &sorted_cols,
                                    const FunctionSpec &f) {
  if (sorted_cols.size() != f.dim()) {
    throw DimensionMismatch("batch has " + std::to_string(sorted_cols.size()) +
                            " columns but the function has dimension " + std::to_string(f.dim()));
  }
  const std::size_t n = sorted_cols.front().size();
  if (n == 0) throw DimensionMismatch("batch has no rows");
  std::vector<double> point(f.dim());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f.dim(); ++j) point[j] = sorted_cols[j][i];
    const double v = f(point);
    if (!std::isfinite(v)) {
      throw EvaluationError("phi is not finite at order statistic " + std::to_string(i + 1), i);
    }
    sum += v;
  }
  return sum / static_cast<double>(n);
}

inline std::vector<std::vector<double>> sorted_columns(const SampleBatch &batch) {
  std::vector<std::vector<double>> cols(batch.d());
  for (std::size_t j = 0; j < batch.d(); ++j) cols[j] = batch.sorted_column(j);
  return cols;
}

/// gamma(x) = phi(F_1^-1(x), ..., F_d^-1(x)).
inline double gamma_eval(const FunctionSpec &f, const Margins &margins, double x) {
  check_margins(f, margins);
  if (!(x > 0.0 && x < 1.0)) throw DomainError("gamma_eval: x must lie in (0,1)");
  std::vector<double> point(f.dim());
  for (std::size_t j = 0; j < f.dim(); ++j) point[j] = margins[j].quantile(x);
  const double v = f(point);
  if (!std::isfinite(v)) {
    throw EvaluationError("gamma is not finite at x = " + std::to_string(x));
  }
  return v;
}

/// Integral of gamma over (0,1). All-discrete margins give an exact finite sum
/// over the pieces between quantile jumps; otherwise graded adaptive quadrature.
inline GammaBar gamma_bar(const FunctionSpec &f, const Margins &margins) {
  check_margins(f, margins);
  const bool all_discrete =
      std::all_of(margins.begin(), margins.end(), [](const auto &m) { return m.is_empirical(); });
  if (all_discrete) {
    std::vector<double> cuts{0.0, 1.0};
    for (const auto &m : margins) {
      const auto j = m.jump_levels();
      cuts.insert(cuts.end(), j.begin(), j.end());
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      // The generalized inverse is constant on (t_i, t_{i+1}].
      total += (cuts[i + 1] - cuts[i]) * gamma_eval(f, margins, 0.5 * (cuts[i] + cuts[i + 1]));
    }
    return {total, 0.0};
  }
  const auto res = quad::integrate_unit([&](double x) { return gamma_eval(f, margins, x); });
  return {res.value, res.error};
}

inline StatisticResult estimate_statistic(const SampleBatch &batch, const FunctionSpec &f,
                                          const Margins *margins = nullptr) {
  if (batch.d() != f.dim()) {
    throw DimensionMismatch("batch has " + std::to_string(batch.d()) +
                            " columns but the function has dimension " + std::to_string(f.dim()));
  }
  StatisticResult r;
  r.n = batch.n();
  r.value = statistic_from_sorted(sorted_columns(batch), f);
  if (margins != nullptr) {
    const GammaBar g = gamma_bar(f, *margins);
    r.gamma_bar = g.value;
    r.gamma_bar_error = g.error;
    r.centered_scaled = std::sqrt(static_cast<double>(r.n)) * (r.value - g.value);
  }
  return r;
}

/// Rearrangement bounds on (1/n) sum_i x_i y_pi(i) over all permutations pi.
inline SampleBounds broken_sample_bounds(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("x has " + std::to_string(x.size()) + " values, y has " +
                            std::to_string(y.size()));
  }
  if (x.empty()) throw DimensionMismatch("empty samples");
  std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const std::size_t n = xs.size();
  double up = 0.0, lo = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    up += xs[i] * ys[i];
    lo += xs[i] * ys[n - 1 - i];
  }
  return {lo / static_cast<double>(n), up / static_cast<double>(n)};
}

} // namespace mqstat

#endif // MQSTAT_QUANTILE_STAT_HPP
