#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mqstat/mqstat.hpp"

using namespace mqstat;

namespace {
GeneratorSpec uniform_spec(GeneratorKind kind, std::size_t d, std::size_t n, std::uint64_t seed) {
  GeneratorSpec s;
  s.kind = kind;
  s.margins.assign(d, MarginalModel::uniform());
  s.n = n;
  s.seed = seed;
  return s;
}

double correlation(const std::vector<double> &a, const std::vector<double> &b) {
  const double ma = sample_mean(a), mb = sample_mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> ranks(const std::vector<double> &v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
  return r;
}
} // namespace

TEST(Generate, IndependentMomentsAndCorrelation) {
  const auto b = generate(uniform_spec(GeneratorKind::independent, 2, 10000, 7));
  const auto c0 = b.column(0), c1 = b.column(1);
  EXPECT_NEAR(sample_mean(c0), 0.5, 0.01);
  EXPECT_NEAR(sample_mean(c1), 0.5, 0.01);
  EXPECT_NEAR(correlation(c0, c1), 0.0, 0.03);
}

TEST(Generate, ComonotoneColumnsIdentical) {
  const auto b = generate(uniform_spec(GeneratorKind::comonotone, 3, 500, 2));
  EXPECT_EQ(b.column(0), b.column(1));
  EXPECT_EQ(b.column(0), b.column(2));
}

TEST(Generate, GaussianNearComonotoneSpearman) {
  auto s = uniform_spec(GeneratorKind::gaussian, 2, 10000, 3);
  s.rho = {1.0, 0.999, 0.999, 1.0};
  const auto b = generate(s);
  EXPECT_GE(correlation(ranks(b.column(0)), ranks(b.column(1))), 0.99);
}

TEST(Generate, ReproducibleAndSeedSensitive) {
  auto s = uniform_spec(GeneratorKind::gaussian, 3, 300, 11);
  s.rho = {1, 0.2, -0.3, 0.2, 1, 0.1, -0.3, 0.1, 1};
  const auto a = generate(s), b = generate(s);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  s.seed = 12;
  const auto c = generate(s);
  EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST(Generate, MarginsPassKs) {
  const Margins m{MarginalModel::exponential(2.0), MarginalModel::normal(1.0, 3.0), MarginalModel::uniform(-1, 4)};
  for (auto kind : {GeneratorKind::independent, GeneratorKind::comonotone, GeneratorKind::gaussian}) {
    GeneratorSpec s;
    s.kind = kind;
    s.margins = m;
    s.n = 10000;
    s.seed = 19;
    if (kind == GeneratorKind::gaussian) s.rho = {1, 0.5, 0.2, 0.5, 1, 0.4, 0.2, 0.4, 1};
    const auto b = generate(s);
    for (std::size_t j = 0; j < 3; ++j) {
      const auto ks = ks_one_sample(b.column(j), [&](double x) { return m[j].cdf(x); });
      EXPECT_GE(ks.p_value, 0.001) << to_string(kind) << " column " << j;
    }
  }
}

TEST(Generate, EmpiricalCopulaWithinBand) {
  const std::size_t n = 10000;
  const double band = 4.0 / std::sqrt(static_cast<double>(n));
  for (auto kind : {GeneratorKind::independent, GeneratorKind::comonotone, GeneratorKind::gaussian}) {
    auto s = uniform_spec(kind, 2, n, 23);
    if (kind == GeneratorKind::gaussian) s.rho = {1, -0.6, -0.6, 1};
    const auto b = generate(s);
    const auto model = copulas_of(s).pair(0, 1);
    for (int i = 1; i <= 10; ++i)
      for (int j = 1; j <= 10; ++j) {
        const double x = i / 10.0 - 1e-12, y = j / 10.0 - 1e-12;
        std::size_t hit = 0;
        for (std::size_t r = 0; r < n; ++r) hit += (b.at(r, 0) <= x && b.at(r, 1) <= y);
        EXPECT_LE(std::abs(static_cast<double>(hit) / n - model(x, y)), band) << to_string(kind);
      }
  }
}

TEST(Generate, Errors) {
  auto s = uniform_spec(GeneratorKind::gaussian, 2, 10, 1);
  s.rho = {1, 0.5, 0.4, 1};
  EXPECT_THROW(generate(s), ParameterError);
  s = uniform_spec(GeneratorKind::gaussian, 3, 10, 1);
  s.rho = {1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1}; // not PSD
  EXPECT_THROW(generate(s), ParameterError);
  s.rho = {1, 0.5, 0.5, 1};
  EXPECT_THROW(generate(s), DimensionMismatch);
}

TEST(Generate, AntitheticMirrors) {
  auto s = uniform_spec(GeneratorKind::independent, 2, 7, 5);
  s.antithetic = true;
  const auto b = generate_uniforms(s);
  for (std::size_t i = 4; i < 7; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(b.at(i, j), 1.0 - b.at(i - 4, j));
}

TEST(OrderStats, SingleIsUniform) {
  Rng rng(1);
  double s = 0.0;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) s += uniform_order_stats_direct(1, rng)[0];
  EXPECT_NEAR(s / draws, 0.5, 0.005);
}

TEST(OrderStats, VarianceMatchesFormula) {
  Rng rng(2);
  std::vector<double> v;
  for (int k = 0; k < 100000; ++k) v.push_back(uniform_order_stats_direct(100, rng)[29]);
  const double expect = order_stat_variance(100, 30).variance;
  EXPECT_NEAR(sample_variance(v), expect, 0.05 * expect);
  const auto one = uniform_order_stats_direct(100, 4);
  EXPECT_TRUE(std::is_sorted(one.begin(), one.end()));
  EXPECT_THROW(uniform_order_stats_direct(0, 4), DomainError);
}

TEST(OrderStats, SameLawAsSorting) {
  Rng a(31), b(32);
  std::vector<double> direct, sorted;
  std::vector<double> u(100);
  for (int k = 0; k < 10000; ++k) {
    direct.push_back(uniform_order_stats_direct(100, a)[49]);
    for (auto &x : u) x = b.uniform();
    std::nth_element(u.begin(), u.begin() + 49, u.end());
    sorted.push_back(u[49]);
  }
  EXPECT_GE(ks_two_sample(direct, sorted).p_value, 0.01);
}

TEST(MonteCarlo, IdentityClassical) {
  MonteCarloOptions o;
  o.reps = 500;
  o.threads = 4;
  const auto r = mc_clt(functions::identity(), uniform_spec(GeneratorKind::independent, 1, 256, 1), o);
  EXPECT_NEAR(r.gamma_bar, 0.5, 1e-12);
  EXPECT_NEAR(*r.sigma2_model, 1.0 / 12.0, 1e-9);
  EXPECT_NEAR(r.emp_var, 1.0 / 12.0, 0.2 / 12.0);
  ASSERT_TRUE(r.ks_pvalue.has_value());
  EXPECT_GE(*r.ks_pvalue, 0.0);
  EXPECT_LE(*r.ks_pvalue, 1.0);
}

TEST(MonteCarlo, ThreadCountInvariant) {
  auto s = uniform_spec(GeneratorKind::independent, 2, 100, 99);
  MonteCarloOptions o;
  o.reps = 50;
  o.sigma2 = 2.0 / 45.0;
  o.threads = 1;
  const auto a = mc_clt(functions::product(2), s, o);
  o.threads = 5;
  const auto b = mc_clt(functions::product(2), s, o);
  EXPECT_EQ(a.values, b.values);
}

TEST(MonteCarlo, MonomialIndependenceAndComonotone) {
  MonteCarloOptions o;
  o.reps = 2000;
  o.threads = 8;
  o.sigma2 = 2.0 / 45.0;
  const auto a = mc_clt(functions::product(2), uniform_spec(GeneratorKind::independent, 2, 4096, 10), o);
  EXPECT_GE(a.emp_var, 0.0400);
  EXPECT_LE(a.emp_var, 0.0489);
  o.sigma2 = 4.0 / 45.0;
  const auto c = mc_clt(functions::product(2), uniform_spec(GeneratorKind::comonotone, 2, 4096, 10), o);
  EXPECT_GE(c.emp_var, 0.080);
  EXPECT_LE(c.emp_var, 0.098);
  EXPECT_GE(*c.ks_pvalue, 0.01);
}

TEST(MonteCarlo, AntitheticReducesVariance) {
  auto s = uniform_spec(GeneratorKind::independent, 2, 256, 41);
  const auto f = functions::product(2);
  const auto plain = mc_statistics({f}, s, 2000, 8);
  s.antithetic = true;
  const auto anti = mc_statistics({f}, s, 2000, 8);
  std::vector<double> p, q;
  for (std::size_t r = 0; r < 2000; ++r) {
    p.push_back(plain[r][0]);
    q.push_back(anti[r][0]);
  }
  EXPECT_LE(sample_variance(q) / sample_variance(p), 0.9);
}

TEST(MonteCarlo, Errors) {
  MonteCarloOptions o;
  o.reps = 1;
  EXPECT_THROW(mc_clt(functions::identity(), uniform_spec(GeneratorKind::independent, 1, 10, 1), o), ParameterError);
  o.reps = 10;
  EXPECT_THROW(mc_clt(functions::product(2), uniform_spec(GeneratorKind::independent, 1, 10, 1), o), DimensionMismatch);
}

TEST(Slln, MonomialIndependence) {
  const auto t = mc_slln(functions::product(2), uniform_spec(GeneratorKind::independent, 2, 0, 5),
                         {100, 1000, 10000, 100000});
  EXPECT_NEAR(t.gamma_bar, 1.0 / 3.0, 1e-12);
  EXPECT_LE(t.final_abs_dev, 0.01);
  EXPECT_EQ(t.values.size(), 4u);
}

TEST(Slln, ComonotoneSameLimit) {
  const auto t = mc_slln(functions::product(2), uniform_spec(GeneratorKind::comonotone, 2, 0, 6), {1000, 100000});
  EXPECT_LE(t.final_abs_dev, 0.01);
}

TEST(Slln, ConstantIsExact) {
  const auto t = mc_slln(functions::constant(2, 2.5), uniform_spec(GeneratorKind::comonotone, 2, 0, 7), {1, 10, 100},
                         2.5);
  for (double v : t.values) EXPECT_EQ(v, 2.5);
  EXPECT_EQ(t.max_abs_dev, 0.0);
}

TEST(Slln, RejectsInputs) {
  const auto s = uniform_spec(GeneratorKind::independent, 2, 0, 5);
  EXPECT_THROW(mc_slln(functions::product(2), s, {}), ParameterError);
  EXPECT_THROW(mc_slln(functions::product(2), s, {0, 5}), ParameterError);
}

TEST(Counterexample, DiagonalIndicator) {
  for (std::size_t n : {1u, 1000u}) {
    const auto r = counterexample_c1(n, 1);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_NEAR(r.gamma_bar, 1.0, 1e-14);
  }
  EXPECT_EQ(counterexample_c1(500, 3, true).statistic, 1.0);
}

TEST(Counterexample, GrowthValues) {
  EXPECT_EQ(functions::growth_example_value(0.81, 0.95), 125.0);
  EXPECT_EQ(functions::growth_example_value(0.3, 0.3), 1.0);
  EXPECT_EQ(functions::growth_example_value(0.9, 0.9), 1.0);
  // Just inside the inner boundary of S_5 the value has dropped to about 1.
  EXPECT_NEAR(functions::growth_example_value(5.0 / 6.0 - 1e-13, 0.9), 1.0, 1e-4);
  EXPECT_GT(functions::growth_example_value(5.0 / 6.0 - 1e-3, 0.9), 100.0);
  const double gb = gamma_bar(functions::growth_example(), {MarginalModel::uniform(), MarginalModel::uniform()}).value;
  EXPECT_NEAR(gb, 1.0, 1e-12);
}

TEST(Counterexample, GrowthMedian) {
  for (std::size_t n : {1000u, 10000u}) {
    std::vector<double> s;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto r = counterexample_c2(n, seed);
      EXPECT_GE(r.statistic, r.witness * 0.999);
      s.push_back(r.statistic);
    }
    std::nth_element(s.begin(), s.begin() + 25, s.end());
    EXPECT_GE(s[25], 0.8 * std::sqrt(static_cast<double>(n)));
  }
}
