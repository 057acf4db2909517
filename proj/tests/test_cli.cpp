#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "cli_runner.hpp"

using clirun::config;
using clirun::quote;
using clirun::run;
using Json = nlohmann::json;

namespace {
std::string fixture(const std::string &name) { return quote(std::string(MQSTAT_FIXTURES) + "/" + name); }

Json parsed(const clirun::Result &r) {
  EXPECT_EQ(r.code, 0) << r.err;
  return Json::parse(r.out);
}
} // namespace

TEST(Cli, EstimateThreeRows) {
  const auto j = parsed(run("estimate --data " + fixture("three_rows.csv") + " --function product"));
  EXPECT_NEAR(j["value"].get<double>(), 0.18666666666666668, 1e-15);
  EXPECT_FALSE(j.contains("gamma_bar"));
}

TEST(Cli, EstimateMissingColumn) {
  // A 1-column batch cannot feed a 2-argument function.
  const auto r2 = run("estimate --data " + fixture("one_column.csv") + " --function " +
                      quote(R"({"id": "product", "dim": 2})"));
  EXPECT_EQ(r2.code, 2);
  EXPECT_NE(r2.err.find("dimension mismatch"), std::string::npos) << r2.err;
  const auto ragged = run("estimate --data " + fixture("ragged.csv") + " --function product");
  EXPECT_EQ(ragged.code, 2);
  EXPECT_NE(ragged.err.find("dimension mismatch"), std::string::npos);
}

TEST(Cli, EstimateWithMargins) {
  const auto j = parsed(run("estimate --config " + config("estimate_product.json")));
  EXPECT_NEAR(j["gamma_bar"].get<double>(), 1.0 / 3.0, 1e-12);
  EXPECT_TRUE(j.contains("centered_scaled"));
}

TEST(Cli, EstimateExpression) {
  const auto j = parsed(run("estimate --data " + fixture("three_rows.csv") + " --function " + quote("x*y")));
  EXPECT_NEAR(j["value"].get<double>(), 0.18666666666666668, 1e-15);
}

TEST(Cli, VarianceMonomial) {
  const auto j = parsed(run("variance --config " + config("variance_monomial_independence.json")));
  EXPECT_NEAR(j["sigma2"].get<double>(), 2.0 / 45.0, 1e-9);
  EXPECT_LE(j["finite_n_check"]["gap"].get<double>(), 5e-3);
}

TEST(Cli, VarianceIdentity) {
  const auto j = parsed(run("variance --config " + config("variance_identity.json")));
  EXPECT_NEAR(j["sigma2"].get<double>(), 1.0 / 12.0, 1e-9);
}

TEST(Cli, VarianceCovariance) {
  const auto j = parsed(run("variance --config " + config("variance_covariance.json")));
  EXPECT_NEAR(j["matrix"][0][1].get<double>(), 1.0 / 12.0, 1e-9);
  EXPECT_NEAR(j["matrix"][1][1].get<double>(), 4.0 / 45.0, 1e-9);
}

TEST(Cli, VarianceEndpointPowerDiverges) {
  const auto r = run("variance --config " + config("variance_endpoint_power_0.3.json"));
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("divergence"), std::string::npos);
}

TEST(Cli, ProbeVerdicts) {
  auto verdict = [](const std::string &cfg) {
    const auto j = parsed(run("probe --config " + config(cfg)));
    return j["reports"][0]["verdict"].get<std::string>();
  };
  EXPECT_EQ(verdict("probe_endpoint_power_0.2.json"), "converged");
  EXPECT_EQ(verdict("probe_endpoint_power_0.3.json"), "diverging");
  EXPECT_EQ(verdict("probe_bounded.json"), "converged");
}

TEST(Cli, MonteCarloWritesFiles) {
  const auto dir = clirun::scratch_dir();
  const auto r = run("mc --function identity --config " + config("mc_identity.json") + " --threads 4 --out " +
                     quote(dir.string()));
  const auto j = parsed(r);
  EXPECT_NEAR(j["emp_var"].get<double>(), 1.0 / 12.0, 0.1 / 12.0);
  EXPECT_TRUE(std::filesystem::exists(dir / "mc.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "mc.meta.json"));
  EXPECT_EQ(clirun::slurp(dir / "mc.json"), r.out);
  const auto csv = clirun::slurp(dir / "mc_replications.csv");
  EXPECT_EQ(csv.rfind("rep,centered_scaled\n", 0), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Cli, Slln) {
  const auto j = parsed(run("mc --config " + config("mc_slln.json")));
  EXPECT_LE(j["final_abs_dev"].get<double>(), 0.01);
}

TEST(Cli, CounterexampleC1) {
  const auto j = parsed(run("counterexample c1 --config " + config("counterexample_c1.json")));
  EXPECT_TRUE(j["statistic_always_zero"].get<bool>());
  for (const auto &row : j["rows"]) EXPECT_NEAR(row["gamma_bar"].get<double>(), 1.0, 1e-12);
}

TEST(Cli, CounterexampleC2) {
  const auto r = run("counterexample c2 --threads 4 --config " + config("counterexample_c2.json") + " ");
  const auto j = parsed(r);
  for (const auto &row : j["rows"]) EXPECT_GE(row["median_over_sqrt_n"].get<double>(), 0.8);
  EXPECT_EQ(j["c2_probe"]["verdict"], "diverging");
}

TEST(Cli, CounterexampleUnknown) { EXPECT_EQ(run("counterexample c9").code, 2); }

TEST(Cli, ConfigErrors) {
  EXPECT_EQ(run("variance --config " + fixture("does_not_exist.json")).code, 2);
  EXPECT_EQ(run("bounds --config " + fixture("uniform_margins.json")).code, 2); // not an object
  EXPECT_EQ(run("estimate --data " + fixture("three_rows.csv") + " --function " + quote("x +")).code, 2);
  EXPECT_EQ(run("mc --threads 0 --function identity").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST(Cli, Bounds) {
  const auto j = parsed(run("bounds --config " + config("bounds.json")));
  EXPECT_DOUBLE_EQ(j["upper"].get<double>(), 14.0 / 3.0);
  EXPECT_DOUBLE_EQ(j["lower"].get<double>(), 10.0 / 3.0);
}

TEST(Cli, CsvFormat) {
  const auto r = run("bounds --format csv --config " + config("bounds.json"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("key,value\n", 0), 0u);
  EXPECT_NE(r.out.find("upper,4.666666666666667"), std::string::npos) << r.out;
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
  // The acceptance binary covers every command; this is the quick version.
  const auto a = run("counterexample c2 --seed 3 --threads 1");
  const auto b = run("counterexample c2 --seed 3 --threads 6");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}
