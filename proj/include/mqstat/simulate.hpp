#ifndef MQSTAT_SIMULATE_HPP
#define MQSTAT_SIMULATE_HPP

// Seeded data generation and Monte Carlo harnesses.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mqstat/asymptotics.hpp"
#include "mqstat/errors.hpp"
#include "mqstat/functions.hpp"
#include "mqstat/ks.hpp"
#include "mqstat/model.hpp"
#include "mqstat/parallel.hpp"
#include "mqstat/quantile_stat.hpp"
#include "mqstat/rng.hpp"
#include "mqstat/special.hpp"

namespace mqstat {

enum class GeneratorKind { independent, comonotone, gaussian };

inline std::string to_string(GeneratorKind k) {
  switch (k) {
  case GeneratorKind::independent: return "independent";
  case GeneratorKind::comonotone: return "comonotone";
  case GeneratorKind::gaussian: return "gaussian";
  }
  return "?";
}

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::independent;
  /// Rows come in pairs (U, 1 - U) on the uniform scale.
  bool antithetic = false;
  /// Column j is F_j^-1 of its uniform; for the comonotone kind this makes
  /// column j equal to g_j(Z) with g_j = F_j^-1 and Z uniform.
  Margins margins;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  /// Correlation matrix of the latent normals, row-major d x d (gaussian kind).
  std::vector<double> rho;

  std::size_t dim() const noexcept { return margins.size(); }
};

namespace detail {

/// Factor A with A A^T = rho, from a pivoted LDL^T. Rejects matrices that are
/// not symmetric, lack a unit diagonal, or are not positive semidefinite.
inline Eigen::MatrixXd correlation_factor(const std::vector<double> &rho, std::size_t d) {
  if (rho.size() != d * d) throw DimensionMismatch("rho matrix must be d x d");
  Eigen::MatrixXd r(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) r(a, b) = rho[a * d + b];
  for (std::size_t a = 0; a < d; ++a) {
    if (std::abs(r(a, a) - 1.0) > 1e-12) throw ParameterError("rho matrix needs a unit diagonal");
    for (std::size_t b = 0; b < d; ++b) {
      if (!std::isfinite(r(a, b)) || std::abs(r(a, b) - r(b, a)) > 1e-12) {
        throw ParameterError("rho matrix must be finite and symmetric");
      }
      if (std::abs(r(a, b)) > 1.0) throw ParameterError("rho entries must lie in [-1,1]");
    }
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(r);
  if (ldlt.info() != Eigen::Success) throw ParameterError("rho matrix factorization failed");
  Eigen::VectorXd dvec = ldlt.vectorD();
  for (Eigen::Index a = 0; a < dvec.size(); ++a) {
    if (dvec(a) < -1e-10) throw ParameterError("rho matrix is not positive semidefinite");
    dvec(a) = std::sqrt(std::max(0.0, dvec(a)));
  }
  Eigen::MatrixXd l = ldlt.matrixL();
  Eigen::MatrixXd a = ldlt.transpositionsP().transpose() * (l * dvec.asDiagonal());
  return a;
}

inline void validate(const GeneratorSpec &spec) {
  if (spec.margins.empty()) throw ParameterError("generator: no margins");
  if (spec.n == 0) throw ParameterError("generator: n must be positive");
}

} // namespace detail

/// Pairwise copulas implied by a generator.
inline CopulaSet copulas_of(const GeneratorSpec &spec) {
  const std::size_t d = spec.dim();
  switch (spec.kind) {
  case GeneratorKind::independent: return CopulaSet::uniform_pairs(d, CopulaSpec::independence());
  case GeneratorKind::comonotone: return CopulaSet::uniform_pairs(d, CopulaSpec::comonotone());
  case GeneratorKind::gaussian: {
    if (spec.rho.size() != d * d) throw DimensionMismatch("rho matrix must be d x d");
    CopulaSet s(d);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = j + 1; k < d; ++k) s.set(j, k, CopulaSpec::gaussian(spec.rho[j * d + k]));
    return s;
  }
  }
  return CopulaSet(d, true);
}

/// The n x d batch of uniforms U before the margins are applied.
inline SampleBatch generate_uniforms(const GeneratorSpec &spec) {
  detail::validate(spec);
  const std::size_t n = spec.n, d = spec.dim();
  Rng rng(spec.seed);
  std::vector<double> data(n * d);
  const std::size_t base = spec.antithetic ? (n + 1) / 2 : n;

  Eigen::MatrixXd factor;
  if (spec.kind == GeneratorKind::gaussian) factor = detail::correlation_factor(spec.rho, d);
  Eigen::VectorXd eps(static_cast<Eigen::Index>(d));
  Eigen::VectorXd z(static_cast<Eigen::Index>(d));

  for (std::size_t i = 0; i < base; ++i) {
    double *row = data.data() + i * d;
    switch (spec.kind) {
    case GeneratorKind::independent:
      for (std::size_t j = 0; j < d; ++j) row[j] = rng.uniform();
      break;
    case GeneratorKind::comonotone: {
      const double u = rng.uniform();
      for (std::size_t j = 0; j < d; ++j) row[j] = u;
      break;
    }
    case GeneratorKind::gaussian:
      for (std::size_t j = 0; j < d; ++j) eps(static_cast<Eigen::Index>(j)) = normal_quantile(rng.uniform());
      z.noalias() = factor * eps;
      for (std::size_t j = 0; j < d; ++j) {
        // Keep the uniform strictly inside (0,1) even for extreme normals.
        row[j] = std::clamp(normal_cdf(z(static_cast<Eigen::Index>(j))), 0x1.0p-60, 1.0 - 0x1.0p-53);
      }
      break;
    }
  }
  for (std::size_t i = base; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) data[i * d + j] = 1.0 - data[(i - base) * d + j];
  }
  std::string gen = to_string(spec.kind);
  if (spec.antithetic) gen += "+antithetic";
  return SampleBatch(n, d, std::move(data), {gen, spec.seed});
}

/// Observations X = F_j^-1(U).
inline SampleBatch apply_margins(const SampleBatch &uniforms, const Margins &margins) {
  if (uniforms.d() != margins.size()) throw DimensionMismatch("batch and margins differ");
  std::vector<double> data(uniforms.data().begin(), uniforms.data().end());
  const std::size_t d = margins.size();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = margins[i % d].quantile(data[i]);
  return SampleBatch(uniforms.n(), d, std::move(data), uniforms.provenance());
}

inline SampleBatch generate(const GeneratorSpec &spec) {
  return apply_margins(generate_uniforms(spec), spec.margins);
}

/// Uniform order statistics U_{n:1} <= ... <= U_{n:n} as S_i / S_{n+1}, where
/// S_i are partial sums of standard exponentials. O(n), no sort.
inline std::vector<double> uniform_order_stats_direct(std::size_t n, Rng &rng) {
  if (n == 0) throw DomainError("uniform_order_stats_direct: n must be positive");
  std::vector<double> s(n);
  double run = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    run += rng.exponential();
    s[i] = run;
  }
  const double total = run + rng.exponential();
  for (auto &v : s) v /= total;
  return s;
}

inline std::vector<double> uniform_order_stats_direct(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return uniform_order_stats_direct(n, rng);
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MonteCarloReport {
  std::size_t reps = 0;
  std::size_t n = 0;
  double gamma_bar = 0.0;
  double emp_mean = 0.0;
  double emp_var = 0.0;
  std::optional<double> sigma2_model;
  std::optional<double> ks_stat;
  std::optional<double> ks_pvalue;
  /// sqrt(n) (T_n - gamma_bar) per replication, in replication order.
  std::vector<double> values;
};

struct MonteCarloOptions {
  std::size_t reps = 1000;
  unsigned threads = 1;
  /// Limiting variance to standardize with; computed from the model when absent.
  std::optional<double> sigma2;
  std::optional<double> gamma_bar;
  QuadratureOptions quadrature{};
};

/// T_n of every function in `fs` for each replication; out[r][s] is T_n(fs[s])
/// on replication r, which uses seed child_seed(spec.seed, r).
inline std::vector<std::vector<double>> mc_statistics(const std::vector<FunctionSpec> &fs,
                                                      const GeneratorSpec &spec, std::size_t reps,
                                                      unsigned threads) {
  detail::validate(spec);
  for (const auto &f : fs) {
    if (f.dim() != spec.dim()) throw DimensionMismatch("function and generator differ in dimension");
  }
  std::vector<std::vector<double>> out(reps, std::vector<double>(fs.size()));
  parallel_for(reps, threads, [&](std::size_t r) {
    GeneratorSpec s = spec;
    s.seed = child_seed(spec.seed, r);
    try {
      const auto cols = sorted_columns(generate(s));
      for (std::size_t k = 0; k < fs.size(); ++k) out[r][k] = statistic_from_sorted(cols, fs[k]);
    } catch (const std::exception &e) {
      throw EvaluationError("replication " + std::to_string(r) + ": " + e.what(), r);
    }
  });
  return out;
}

inline double sample_mean(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double sample_variance(const std::vector<double> &v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline MonteCarloReport mc_clt(const FunctionSpec &f, const GeneratorSpec &spec,
                               const MonteCarloOptions &opt = {}) {
  if (opt.reps < 2) throw ParameterError("mc_clt: need at least 2 replications");
  MonteCarloReport rep;
  rep.reps = opt.reps;
  rep.n = spec.n;
  rep.gamma_bar = opt.gamma_bar ? *opt.gamma_bar : gamma_bar(f, spec.margins).value;
  if (opt.sigma2) {
    rep.sigma2_model = opt.sigma2;
  } else {
    QuadratureOptions q = opt.quadrature;
    q.threads = opt.threads;
    rep.sigma2_model = sigma_squared(f, spec.margins, copulas_of(spec), q).sigma2;
  }
  const auto stats = mc_statistics({f}, spec, opt.reps, opt.threads);
  const double rn = std::sqrt(static_cast<double>(spec.n));
  rep.values.reserve(opt.reps);
  for (const auto &row : stats) rep.values.push_back(rn * (row[0] - rep.gamma_bar));
  rep.emp_mean = sample_mean(rep.values);
  rep.emp_var = sample_variance(rep.values);
  if (*rep.sigma2_model > 0.0) {
    const double sd = std::sqrt(*rep.sigma2_model);
    std::vector<double> z(rep.values);
    for (auto &v : z) v /= sd;
    const auto ks = ks_one_sample(z, normal_cdf);
    rep.ks_stat = ks.statistic;
    rep.ks_pvalue = ks.p_value;
  }
  return rep;
}

struct SllnTrace {
  std::vector<std::size_t> n_grid;
  std::vector<double> values;
  double gamma_bar = 0.0;
  /// max over the grid of |T_n - gamma_bar|.
  double max_abs_dev = 0.0;
  /// |T_n - gamma_bar| at the largest n.
  double final_abs_dev = 0.0;
};

/// One trajectory: T_n on nested prefixes of a single batch of max(n_grid) rows.
inline SllnTrace mc_slln(const FunctionSpec &f, const GeneratorSpec &spec,
                         std::vector<std::size_t> n_grid,
                         std::optional<double> known_gamma_bar = std::nullopt) {
  if (n_grid.empty()) throw ParameterError("mc_slln: empty n grid");
  std::sort(n_grid.begin(), n_grid.end());
  if (n_grid.front() == 0) throw ParameterError("mc_slln: n must be positive");
  if (f.dim() != spec.dim()) throw DimensionMismatch("function and generator differ in dimension");
  GeneratorSpec s = spec;
  s.n = n_grid.back();
  const auto batch = generate(s);
  SllnTrace tr;
  tr.n_grid = n_grid;
  tr.gamma_bar = known_gamma_bar ? *known_gamma_bar : gamma_bar(f, spec.margins).value;
  const std::size_t d = spec.dim();
  for (std::size_t n : n_grid) {
    std::vector<std::vector<double>> cols(d, std::vector<double>(n));
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < n; ++i) cols[j][i] = batch.at(i, j);
      std::stable_sort(cols[j].begin(), cols[j].end());
    }
    const double t = statistic_from_sorted(cols, f);
    tr.values.push_back(t);
    tr.max_abs_dev = std::max(tr.max_abs_dev, std::abs(t - tr.gamma_bar));
  }
  tr.final_abs_dev = std::abs(tr.values.back() - tr.gamma_bar);
  return tr;
}

// ---------------------------------------------------------------------------
// Counterexamples

struct CounterexampleC1 {
  double statistic = 0.0;
  double gamma_bar = 0.0;
};

/// Diagonal indicator on two continuous uniform columns, independent unless
/// `comonotone` is set.
inline CounterexampleC1 counterexample_c1(std::size_t n, std::uint64_t seed,
                                          bool comonotone = false) {
  GeneratorSpec spec;
  spec.kind = comonotone ? GeneratorKind::comonotone : GeneratorKind::independent;
  spec.margins = {MarginalModel::uniform(), MarginalModel::uniform()};
  spec.n = n;
  spec.seed = seed;
  const auto f = functions::diagonal_indicator();
  CounterexampleC1 out;
  out.statistic = estimate_statistic(generate(spec), f).value;
  out.gamma_bar = gamma_bar(f, spec.margins).value;
  return out;
}

struct CounterexampleC2 {
  double statistic = 0.0;
  /// sqrt(n) * I(W_n in (a/(a+1), 1)^2) with W_n the pair of column maxima and
  /// a = ceil(sqrt(n)).
  double witness = 0.0;
  double gamma_bar = 1.0;
};

inline CounterexampleC2 counterexample_c2(std::size_t n, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.margins = {MarginalModel::uniform(), MarginalModel::uniform()};
  spec.n = n;
  spec.seed = seed;
  const auto batch = generate(spec);
  const auto cols = sorted_columns(batch);
  const auto f = functions::growth_example();
  CounterexampleC2 out;
  out.statistic = statistic_from_sorted(cols, f);
  const double rn = std::sqrt(static_cast<double>(n));
  const double a = std::ceil(rn);
  const double edge = a / (a + 1.0);
  out.witness = (cols[0].back() > edge && cols[1].back() > edge) ? rn : 0.0;
  return out;
}

} // namespace mqstat

#endif // MQSTAT_SIMULATE_HPP
