#ifndef MQSTAT_KS_HPP
#define MQSTAT_KS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mqstat/errors.hpp"
#include "mqstat/special.hpp"

namespace mqstat {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

namespace detail {
// Asymptotic Kolmogorov tail with Stephens' finite-sample correction.
inline double ks_p_value(double d, double effective_n) {
  const double rn = std::sqrt(effective_n);
  return kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d);
}
} // namespace detail

/// One-sample Kolmogorov-Smirnov test of `sample` against the continuous CDF `cdf`.
inline KsResult ks_one_sample(std::span<const double> sample,
                              const std::function<double(double)> &cdf) {
  if (sample.empty()) throw DimensionMismatch("ks_one_sample: empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, detail::ks_p_value(d, n)};
}

/// Two-sample Kolmogorov-Smirnov test.
inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DimensionMismatch("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, detail::ks_p_value(d, na * nb / (na + nb))};
}

} // namespace mqstat

#endif // MQSTAT_KS_HPP
