#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "mqstat/mqstat.hpp"
#include "oracles.hpp"

using namespace mqstat;

namespace {
const Margins kU1{MarginalModel::uniform()};
const Margins kU2{MarginalModel::uniform(), MarginalModel::uniform()};
const CopulaSet kNone1(1, true);

CopulaSet pairs(const CopulaSpec &c) { return CopulaSet::uniform_pairs(2, c); }

/// Cov(U1^2, U2^2) for a Gaussian copula by brute 2-D Simpson over the latent normals.
double gaussian_cov_u2(double rho) {
  const double s2 = 1 - rho * rho;
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(s2));
  // Tabulate Phi on the Simpson grid once.
  const int n = 600;
  const double a = -8.5, b = 8.5, h = (b - a) / n;
  std::vector<double> cdf(n + 1);
  for (int i = 0; i <= n; ++i) cdf[i] = oracle::normal_cdf(a + i * h);
  auto w = [n](int i) { return (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
  double s = 0.0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const double x = a + i * h, y = a + j * h;
      const double dens = norm * std::exp(-(x * x - 2 * rho * x * y + y * y) / (2 * s2));
      s += w(i) * w(j) * dens * cdf[i] * cdf[i] * cdf[j] * cdf[j];
    }
  return s * h * h / 9.0 - 1.0 / 9.0;
}
} // namespace

TEST(SigmaSquared, IdentityOneTwelfth) {
  const auto r = sigma_squared(functions::sum_on_uniform(1), kU1, kNone1);
  EXPECT_NEAR(r.sigma2, 1.0 / 12.0, 1e-12);
  EXPECT_EQ(r.sigma2, 2.0 * r.same_j_term + 2.0 * r.cross_jk_term);
  EXPECT_GE(r.sigma2, -r.quad_error);
}

TEST(SigmaSquared, IdentityNumericDerivatives) {
  EXPECT_NEAR(sigma_squared(functions::identity(), kU1, kNone1).sigma2, 1.0 / 12.0, 1e-9);
}

TEST(SigmaSquared, MonomialIndependence) {
  const auto r = sigma_squared(functions::monomial_on_uniform({1, 1}), kU2, pairs(CopulaSpec::independence()));
  EXPECT_NEAR(r.sigma2, 2.0 / 45.0, 1e-12);
  EXPECT_EQ(r.cross_jk_term, 0.0);
}

TEST(SigmaSquared, MonomialComonotoneMatchesSquare) {
  const auto r = sigma_squared(functions::monomial_on_uniform({1, 1}), kU2, pairs(CopulaSpec::comonotone()));
  EXPECT_NEAR(r.sigma2, 4.0 / 45.0, 1e-12);
  const auto sq = sigma_squared(functions::square_on_uniform(), kU1, kNone1);
  EXPECT_NEAR(r.sigma2, sq.sigma2, 1e-12);
}

TEST(SigmaSquared, ComonotoneCrossOfOnes) {
  // psi_1 = psi_2 = 1 (sum); the cross block is 2 * (1/3 - 1/4).
  const auto r = sigma_squared(functions::sum_on_uniform(2), kU2, pairs(CopulaSpec::comonotone()));
  EXPECT_NEAR(2.0 * r.cross_jk_term, 1.0 / 6.0, 1e-12);
}

TEST(SigmaSquared, GaussianAgainstMomentOracle) {
  // For phi = xy: sigma^2 = 2/45 + Cov(U1^2, U2^2) / 2.
  const auto r = sigma_squared(functions::monomial_on_uniform({1, 1}), kU2, pairs(CopulaSpec::gaussian(0.5)));
  EXPECT_NEAR(r.sigma2, 2.0 / 45.0 + 0.5 * gaussian_cov_u2(0.5), 1e-7);
}

TEST(SigmaSquared, ScaleEquivariance) {
  const auto f = functions::monomial_on_uniform({1, 2});
  const auto c = pairs(CopulaSpec::gaussian(0.3));
  const double a = sigma_squared(f, kU2, c).sigma2;
  const double b = sigma_squared(f.scaled(3.0), kU2, c).sigma2;
  EXPECT_NEAR(b, 9.0 * a, 1e-9 * b);
}

TEST(SigmaSquared, MissingPairIsConfigError) {
  EXPECT_THROW(sigma_squared(functions::product(2), kU2, CopulaSet(2)), ConfigError);
}

TEST(SigmaSquared, NonIntegrableDiverges) {
  // psi_j ~ x^-1.5 near 0: the same-j integral is infinite.
  EXPECT_THROW(sigma_squared(functions::monomial_on_uniform({-0.25, -0.25}), kU2, pairs(CopulaSpec::independence())),
               DivergenceError);
}

TEST(FiniteN, IdentityAndMonomial) {
  EXPECT_NEAR(finite_n_variance(functions::identity(), kU1, kNone1, 1000), 1.0 / 12.0, 2e-3);
  EXPECT_NEAR(finite_n_variance(functions::product(2), kU2, pairs(CopulaSpec::independence()), 2000), 2.0 / 45.0,
              2e-3);
  EXPECT_THROW(finite_n_variance(functions::identity(), kU1, kNone1, 1), DomainError);
}

TEST(FiniteN, IndependenceCrossBlockIsZero) {
  // Sum of independent coordinates equals the sum of the diagonal blocks alone.
  const auto f = functions::sum(2);
  const double v = finite_n_variance(f, kU2, pairs(CopulaSpec::independence()), 50);
  const double one = finite_n_variance(functions::identity(), kU1, kNone1, 50);
  EXPECT_NEAR(v, 2.0 * one, 1e-12);
}

TEST(FiniteN, OracleAgreementAllBuiltins) {
  const std::vector<std::tuple<FunctionSpec, Margins, CopulaSet>> cases{
      {functions::sum_on_uniform(1), kU1, kNone1},
      {functions::square_on_uniform(), kU1, kNone1},
      {functions::monomial_on_uniform({1, 1}), kU2, pairs(CopulaSpec::independence())},
      {functions::monomial_on_uniform({1, 1}), kU2, pairs(CopulaSpec::comonotone())},
      {functions::monomial_on_uniform({1, 1}), kU2, pairs(CopulaSpec::gaussian(0.5))},
      {functions::sum_on_uniform(2), kU2, pairs(CopulaSpec::gaussian(-0.4))}};
  for (const auto &[f, m, c] : cases) {
    const auto r = sigma_squared(f, m, c);
    const double fin = finite_n_variance(f, m, c, 4096);
    EXPECT_LE(std::abs(r.sigma2 - fin), std::max(5e-3, 3 * r.quad_error)) << f.name();
  }
}

TEST(FiniteN, SingularPsiConvergesSlowly) {
  // psi_j ~ (x(1-x))^-1.2 near the ends: the finite-n sum approaches sigma^2 from
  // far off, so only the trend is checked.
  const auto f = functions::endpoint_power_on_uniform(0.2);
  const auto c = pairs(CopulaSpec::comonotone());
  const double s = sigma_squared(f, kU2, c).sigma2;
  const double a = std::abs(s - finite_n_variance(f, kU2, c, 512));
  const double b = std::abs(s - finite_n_variance(f, kU2, c, 4096));
  EXPECT_LT(b, a);
  EXPECT_LE(b, 0.02);
}

TEST(Covariance, SingleAndIdentical) {
  const auto f = functions::monomial_on_uniform({1, 1});
  const auto c = pairs(CopulaSpec::gaussian(0.5));
  const double s = sigma_squared(f, kU2, c).sigma2;
  const auto one = covariance_matrix({f}, kU2, c);
  ASSERT_EQ(one.m, 1u);
  EXPECT_NEAR(one(0, 0), s, 1e-12);
  const auto two = covariance_matrix({f, f}, kU2, c);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t q = 0; q < 2; ++q) EXPECT_NEAR(two(r, q), s, 1e-12);
}

TEST(Covariance, XAndXSquared) {
  const auto cm = covariance_matrix({functions::sum_on_uniform(1), functions::square_on_uniform()}, kU1, kNone1);
  EXPECT_NEAR(cm(0, 0), 1.0 / 12.0, 1e-12);
  EXPECT_NEAR(cm(1, 1), 4.0 / 45.0, 1e-12);
  // Cov(U, U^2) = 1/4 - 1/6 = 1/12.
  EXPECT_NEAR(cm(0, 1), 1.0 / 12.0, 1e-12);
  EXPECT_EQ(cm(0, 1), cm(1, 0));
  Eigen::Matrix2d m;
  m << cm(0, 0), cm(0, 1), cm(1, 0), cm(1, 1);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(m).eigenvalues().minCoeff(), -1e-8);
}

TEST(Covariance, PolarizationAtFiniteN) {
  // 2 sigma_rs = Var(Z_r + Z_s) - Var Z_r - Var Z_s, each by the finite-n sum.
  const auto a = functions::sum_on_uniform(1);
  const auto b = functions::square_on_uniform();
  const FunctionSpec ab(1, [](std::span<const double> x) { return x[0] + x[0] * x[0]; });
  const std::size_t n = 4096;
  const double vab = finite_n_variance(ab, kU1, kNone1, n);
  const double va = finite_n_variance(a, kU1, kNone1, n);
  const double vb = finite_n_variance(b, kU1, kNone1, n);
  const auto cm = covariance_matrix({a, b}, kU1, kNone1);
  EXPECT_NEAR(cm(0, 1), 0.5 * (vab - va - vb), 2e-3);
}

TEST(Linearization, SingleObservation) {
  const auto b = SampleBatch::from_columns({{0.7}});
  const auto t = linearization(b, functions::identity(), kU1);
  ASSERT_EQ(t.z.size(), 1u);
  EXPECT_NEAR(t.z[0], 0.0, 1e-15);
}

TEST(Linearization, TwoObservationsByHand) {
  const auto b = SampleBatch::from_columns({{0.2, 0.9}});
  const auto t = linearization(b, functions::identity(), kU1);
  EXPECT_NEAR(t.z[0], 0.25, 1e-12);
  EXPECT_NEAR(t.z[1], -0.25, 1e-12);
  EXPECT_EQ(t.residual, t.lhs - t.rhs);
}

TEST(Linearization, MatchesBruteForceLoop) {
  Rng rng(5);
  const std::size_t n = 60;
  std::vector<std::vector<double>> rows(n, std::vector<double>(2));
  std::vector<double> c0(n), c1(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i] = {rng.uniform(), rng.uniform()};
    c0[i] = rows[i][0];
    c1[i] = rows[i][1];
  }
  rows[3][0] = c0[3] = 10.0 / 60.0; // exactly on the grid i/n
  const auto f = functions::monomial_on_uniform({2.0, 1.0});
  const auto t = linearization(SampleBatch::from_columns({c0, c1}), f, kU2);
  const auto z = oracle::linearization_bruteforce(rows, [](double x, std::size_t j) {
    return j == 0 ? 2.0 * x * x : x * x;
  });
  for (std::size_t l = 0; l < n; ++l) EXPECT_NEAR(t.z[l], z[l], 1e-13) << l;
}

TEST(Linearization, RejectsNonUniform) {
  const auto b = SampleBatch::from_columns({{0.2, 1.0}});
  EXPECT_THROW(linearization(b, functions::identity(), kU1), DomainError);
}

TEST(Linearization, MeanZeroAcrossDraws) {
  const std::size_t n = 32, reps = 10000;
  const auto f = functions::monomial_on_uniform({1, 1});
  std::vector<double> z1;
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng(child_seed(77, r));
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform();
      b[i] = rng.uniform();
    }
    z1.push_back(linearization(SampleBatch::from_columns({a, b}), f, kU2, 1.0 / 3.0).z[0]);
  }
  double m = 0, v = 0;
  for (double z : z1) m += z;
  m /= reps;
  for (double z : z1) v += (z - m) * (z - m);
  v /= (reps - 1);
  EXPECT_LE(std::abs(m), 3.0 * std::sqrt(v / reps));
}

TEST(OrderStat, Examples) {
  EXPECT_DOUBLE_EQ(order_stat_variance(3, 2).variance, 0.05);
  EXPECT_DOUBLE_EQ(order_stat_variance(1, 1).variance, 1.0 / 12.0);
  for (std::size_t n : {1u, 2u, 7u, 100u})
    for (std::size_t i = 1; i <= n; ++i) {
      const auto v = order_stat_variance(n, i);
      EXPECT_LE(v.variance, v.bound);
    }
  EXPECT_THROW(order_stat_variance(3, 0), DomainError);
  EXPECT_THROW(order_stat_variance(3, 4), DomainError);
}

TEST(RiemannGap, IdentityCancels) {
  for (std::size_t n : {1u, 10u, 1000u}) EXPECT_NEAR(riemann_gap(functions::identity(), kU1, n), 0.0, 1e-12);
}

TEST(RiemannGap, SquareDecreases) {
  double prev = 1e9;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    // Closed form: sum i^2/(n+1)^2 = n(2n+1)/(6(n+1)).
    const double nn = static_cast<double>(n);
    const double expect = (nn * (2 * nn + 1) / (6 * (nn + 1))) / std::sqrt(nn) - std::sqrt(nn) / 3.0;
    const double g = riemann_gap(functions::square(), kU1, n);
    EXPECT_NEAR(g, expect, 1e-9);
    EXPECT_LT(std::abs(g), prev);
    EXPECT_LE(std::abs(g), 1.0 / std::sqrt(nn));
    prev = std::abs(g);
  }
}

TEST(RiemannGap, EndpointPower) {
  const double beta = std::tgamma(0.8) * std::tgamma(0.8) / std::tgamma(1.6);
  EXPECT_LE(std::abs(riemann_gap(functions::endpoint_power(0.2), kU2, 100000, beta)), 0.05);
}

TEST(Linearization, ResidualSmallAgainstSignal) {
  const auto f = functions::monomial_on_uniform({1, 1});
  std::vector<double> res, lhs;
  for (std::size_t r = 0; r < 100; ++r) {
    Rng rng(child_seed(8, r));
    std::vector<double> a(4096), b(4096);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = rng.uniform();
      b[i] = rng.uniform();
    }
    const auto t = linearization(SampleBatch::from_columns({a, b}), f, kU2, 1.0 / 3.0);
    res.push_back(std::abs(t.residual));
    lhs.push_back(std::abs(t.lhs));
  }
  std::sort(res.begin(), res.end());
  std::sort(lhs.begin(), lhs.end());
  EXPECT_LT(res[50], 0.1 * lhs[50]);
}
