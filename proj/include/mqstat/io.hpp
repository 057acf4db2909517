#ifndef MQSTAT_IO_HPP
#define MQSTAT_IO_HPP

// JSON descriptors for margins, copulas, functions and generators; CSV
// ingestion and export; JSON serialization of reports. The formats are
// documented in docs/formats.md.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "mqstat/asymptotics.hpp"
#include "mqstat/calculus.hpp"
#include "mqstat/errors.hpp"
#include "mqstat/expression.hpp"
#include "mqstat/functions.hpp"
#include "mqstat/model.hpp"
#include "mqstat/quantile_stat.hpp"
#include "mqstat/simulate.hpp"

namespace mqstat::io {

using Json = nlohmann::ordered_json;

/// Throws ConfigError if `obj` has a key outside `allowed`.
inline void check_keys(const Json &obj, std::initializer_list<std::string_view> allowed,
                       const std::string &where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto &item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <class T> T get(const Json &obj, const char *key, const std::string &where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

template <class T> T get_or(const Json &obj, const char *key, T fallback, const std::string &where) {
  if (!obj.contains(key)) return fallback;
  return get<T>(obj, key, where);
}

/// Accepts both {"margin": {...}} and the bare inner object.
inline const Json &unwrap(const Json &j, const char *wrapper) {
  if (j.is_object() && j.size() == 1 && j.contains(wrapper)) return j.at(wrapper);
  return j;
}

// ---------------------------------------------------------------------------
// Margins

inline MarginalModel margin_from_json(const Json &raw) {
  const Json &j = unwrap(raw, "margin");
  const std::string where = "margin";
  check_keys(j, {"kind", "params"}, where);
  const auto kind = get<std::string>(j, "kind", where);
  const Json params = j.contains("params") ? j.at("params") : Json::object();
  const std::string pw = where + " params (" + kind + ")";
  if (kind == "uniform") {
    check_keys(params, {"lo", "hi"}, pw);
    return MarginalModel::uniform(get_or(params, "lo", 0.0, pw), get_or(params, "hi", 1.0, pw));
  }
  if (kind == "exponential") {
    check_keys(params, {"rate"}, pw);
    return MarginalModel::exponential(get_or(params, "rate", 1.0, pw));
  }
  if (kind == "normal") {
    check_keys(params, {"mean", "sd"}, pw);
    return MarginalModel::normal(get_or(params, "mean", 0.0, pw), get_or(params, "sd", 1.0, pw));
  }
  if (kind == "empirical") {
    check_keys(params, {"support", "weights"}, pw);
    return MarginalModel::empirical(get<std::vector<double>>(params, "support", pw),
                                    get_or(params, "weights", std::vector<double>{}, pw));
  }
  if (kind == "tabulated") {
    check_keys(params, {"x", "cdf"}, pw);
    return MarginalModel::tabulated(get<std::vector<double>>(params, "x", pw),
                                    get<std::vector<double>>(params, "cdf", pw));
  }
  throw ConfigError("margin: unknown kind '" + kind + "'");
}

inline Margins margins_from_json(const Json &j) {
  if (!j.is_array() || j.empty()) throw ConfigError("margins: expected a non-empty array");
  Margins out;
  for (const auto &m : j) out.push_back(margin_from_json(m));
  return out;
}

inline Json to_json(const MarginalModel &m) {
  Json params = Json::object();
  std::visit(
      [&](const auto &r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, margin::Uniform>) {
          params["lo"] = r.lo;
          params["hi"] = r.hi;
        } else if constexpr (std::is_same_v<T, margin::Exponential>) {
          params["rate"] = r.rate;
        } else if constexpr (std::is_same_v<T, margin::Normal>) {
          params["mean"] = r.mean;
          params["sd"] = r.sd;
        } else if constexpr (std::is_same_v<T, margin::Empirical>) {
          params["support"] = r.support;
          params["weights"] = r.weights;
        } else if constexpr (std::is_same_v<T, margin::Tabulated>) {
          params["x"] = r.xs;
          params["cdf"] = r.cdf;
        } else {
          params["label"] = r.label;
        }
      },
      m.repr());
  return Json{{"kind", m.kind()}, {"params", params}};
}

// ---------------------------------------------------------------------------
// Copulas

inline CopulaSpec copula_from_json(const Json &raw) {
  const Json &j = unwrap(raw, "copula");
  const std::string where = "copula";
  check_keys(j, {"kind", "rho", "values"}, where);
  const auto kind = get<std::string>(j, "kind", where);
  if (kind == "independence") return CopulaSpec::independence();
  if (kind == "comonotone") return CopulaSpec::comonotone();
  if (kind == "gaussian") return CopulaSpec::gaussian(get<double>(j, "rho", where));
  if (kind == "grid") return CopulaSpec::grid(get<std::vector<std::vector<double>>>(j, "values", where));
  throw ConfigError("copula: unknown kind '" + kind + "'");
}

/// Either "copula": one descriptor for every pair, or "copulas": a list of
/// {"pair": [j, k], "copula": {...}} with 0-based j < k. Missing pairs are an
/// error unless "independence_for_missing" is true.
inline CopulaSet copula_set_from_json(const Json &config, std::size_t d) {
  const bool fill = get_or(config, "independence_for_missing", false, "config");
  if (config.contains("copula") && config.contains("copulas")) {
    throw ConfigError("config: give either 'copula' or 'copulas', not both");
  }
  if (config.contains("copula")) return CopulaSet::uniform_pairs(d, copula_from_json(config.at("copula")));
  CopulaSet set(d, fill || d == 1);
  if (config.contains("copulas")) {
    const auto &list = config.at("copulas");
    if (!list.is_array()) throw ConfigError("copulas: expected an array");
    for (const auto &entry : list) {
      check_keys(entry, {"pair", "copula"}, "copulas entry");
      const auto pair = get<std::vector<std::size_t>>(entry, "pair", "copulas entry");
      if (pair.size() != 2) throw ConfigError("copulas entry: pair must have two indices");
      try {
        set.set(pair[0], pair[1], copula_from_json(entry.at("copula")));
      } catch (const ParameterError &e) {
        throw ConfigError(std::string("copulas entry: ") + e.what());
      }
    }
  }
  // Surface missing pairs now rather than midway through a computation.
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b) (void)set.pair(a, b);
  return set;
}

// ---------------------------------------------------------------------------
// Functions

inline bool all_standard_uniform(const Margins &margins) {
  return std::all_of(margins.begin(), margins.end(),
                     [](const MarginalModel &m) { return m.is_standard_uniform(); });
}

/// A function descriptor is a registry id string ("product"), an object
/// {"id": ..., parameters}, or {"expr": "x*y", "dim": 2}. `dim_hint` is used
/// when the descriptor leaves the dimension open. Analytic diagonal
/// derivatives are attached only when every margin is standard uniform.
inline FunctionSpec function_from_json(const Json &raw, std::size_t dim_hint,
                                       bool uniform_margins) {
  Json j = raw.is_string() ? Json{{"id", raw.get<std::string>()}} : raw;
  const std::string where = "function";
  if (!j.is_object()) throw ConfigError("function: expected a string or an object");
  if (j.contains("expr")) {
    check_keys(j, {"expr", "dim"}, where);
    const auto dim = get_or<std::size_t>(j, "dim", dim_hint, where);
    return expr::function(get<std::string>(j, "expr", where), dim);
  }
  const auto id = get<std::string>(j, "id", where);
  auto need_dim = [&](std::size_t dim) {
    if (dim == 0) throw ConfigError("function '" + id + "': dimension unknown; add \"dim\"");
    return dim;
  };
  if (id == "monomial") {
    check_keys(j, {"id", "alpha"}, where);
    const auto alpha = get<std::vector<double>>(j, "alpha", where);
    return uniform_margins ? functions::monomial_on_uniform(alpha) : functions::monomial(alpha);
  }
  if (id == "product") {
    check_keys(j, {"id", "dim"}, where);
    const auto d = need_dim(get_or<std::size_t>(j, "dim", dim_hint, where));
    const std::vector<double> ones(d, 1.0);
    return uniform_margins ? functions::monomial_on_uniform(ones) : functions::product(d);
  }
  if (id == "sum") {
    check_keys(j, {"id", "dim"}, where);
    const auto d = need_dim(get_or<std::size_t>(j, "dim", dim_hint, where));
    return uniform_margins ? functions::sum_on_uniform(d) : functions::sum(d);
  }
  if (id == "identity") {
    check_keys(j, {"id"}, where);
    return uniform_margins ? functions::sum_on_uniform(1) : functions::identity();
  }
  if (id == "square") {
    check_keys(j, {"id"}, where);
    return uniform_margins ? functions::square_on_uniform() : functions::square();
  }
  if (id == "constant") {
    check_keys(j, {"id", "dim", "value"}, where);
    const auto d = need_dim(get_or<std::size_t>(j, "dim", dim_hint, where));
    return functions::constant(d, get<double>(j, "value", where));
  }
  if (id == "diagonal-indicator") {
    check_keys(j, {"id"}, where);
    return functions::diagonal_indicator();
  }
  if (id == "endpoint-power") {
    check_keys(j, {"id", "alpha"}, where);
    const auto a = get<double>(j, "alpha", where);
    return uniform_margins ? functions::endpoint_power_on_uniform(a) : functions::endpoint_power(a);
  }
  if (id == "growth-example") {
    check_keys(j, {"id"}, where);
    return functions::growth_example();
  }
  throw ConfigError("function: unknown id '" + id + "'");
}

// ---------------------------------------------------------------------------
// Generators

/// {"kind": "independent"|"comonotone"|"gaussian", "rho": number or d x d
/// matrix, "antithetic": bool}. A scalar rho fills every off-diagonal entry.
inline GeneratorSpec generator_from_json(const Json &j, Margins margins, std::size_t n,
                                         std::uint64_t seed) {
  const std::string where = "generator";
  check_keys(j, {"kind", "rho", "antithetic"}, where);
  GeneratorSpec g;
  g.margins = std::move(margins);
  g.n = n;
  g.seed = seed;
  g.antithetic = get_or(j, "antithetic", false, where);
  const auto kind = get<std::string>(j, "kind", where);
  const std::size_t d = g.margins.size();
  if (kind == "independent") {
    g.kind = GeneratorKind::independent;
  } else if (kind == "comonotone") {
    g.kind = GeneratorKind::comonotone;
  } else if (kind == "gaussian") {
    g.kind = GeneratorKind::gaussian;
    if (!j.contains("rho")) throw ConfigError("generator: gaussian kind needs 'rho'");
    const auto &r = j.at("rho");
    g.rho.assign(d * d, 0.0);
    if (r.is_number()) {
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) g.rho[a * d + b] = a == b ? 1.0 : r.get<double>();
    } else {
      const auto m = get<std::vector<std::vector<double>>>(j, "rho", where);
      if (m.size() != d) throw ConfigError("generator: rho must be d x d");
      for (std::size_t a = 0; a < d; ++a) {
        if (m[a].size() != d) throw ConfigError("generator: rho must be d x d");
        for (std::size_t b = 0; b < d; ++b) g.rho[a * d + b] = m[a][b];
      }
    }
    // Validate now so a bad matrix is a configuration error.
    try {
      (void)detail::correlation_factor(g.rho, d);
    } catch (const ParameterError &e) {
      throw ConfigError(std::string("generator: ") + e.what());
    }
  } else {
    throw ConfigError("generator: unknown kind '" + kind + "'");
  }
  return g;
}

// ---------------------------------------------------------------------------
// CSV

struct Table {
  std::vector<std::string> header;
  SampleBatch batch;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                      : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Locale-independent decimal parse; rejects NaN, infinities and trailing junk.
inline double parse_cell(std::string_view cell, std::size_t line_no, std::size_t col) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  const std::string at = " at line " + std::to_string(line_no) + ", column " + std::to_string(col + 1);
  if (cell.empty()) throw ConfigError("csv: empty cell" + at);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ConfigError("csv: cannot parse '" + std::string(cell) + "'" + at);
  }
  if (!std::isfinite(v)) throw ConfigError("csv: non-finite value" + at);
  return v;
}

} // namespace detail

inline Table parse_csv(std::istream &in, const std::string &name = "csv") {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    for (auto cell : detail::split_commas(line)) header.emplace_back(detail::trim(cell));
    break;
  }
  if (header.empty()) throw ConfigError(name + ": missing header row");
  for (const auto &h : header) {
    if (h.empty()) throw ConfigError(name + ": empty column name in header");
    double dummy = 0.0;
    const auto [ptr, ec] = std::from_chars(h.data(), h.data() + h.size(), dummy);
    if (ec == std::errc() && ptr == h.data() + h.size()) {
      throw ConfigError(name + ": header row required (first row is numeric)");
    }
  }
  const std::size_t d = header.size();
  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != d) {
      throw DimensionMismatch(name + " line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " cells, header has " +
                              std::to_string(d));
    }
    for (std::size_t c = 0; c < d; ++c) data.push_back(detail::parse_cell(cells[c], line_no, c));
    ++rows;
  }
  if (rows == 0) throw ConfigError(name + ": no data rows");
  return {std::move(header), SampleBatch(rows, d, std::move(data), {"csv:" + name, 0})};
}

inline Table read_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

/// Shortest round-trip decimal form, independent of the locale.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_csv(std::ostream &out, const std::vector<std::string> &header,
                      const std::vector<std::vector<double>> &columns) {
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << format_double(columns[c][i]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Report serialization

inline Json to_json(const StatisticResult &r) {
  Json j{{"value", r.value}, {"n", r.n}};
  if (r.gamma_bar) j["gamma_bar"] = *r.gamma_bar;
  if (r.gamma_bar_error) j["gamma_bar_error"] = *r.gamma_bar_error;
  if (r.centered_scaled) j["centered_scaled"] = *r.centered_scaled;
  return j;
}

inline Json to_json(const VarianceReport &r) {
  Json j{{"sigma2", r.sigma2},
         {"same_j_term", r.same_j_term},
         {"cross_jk_term", r.cross_jk_term},
         {"quad_error", r.quad_error},
         {"refinement_trace", r.refinement_trace},
         {"clamped", r.clamped},
         {"warnings", r.warnings}};
  if (r.finite_n_check) {
    j["finite_n_check"] = Json{{"n", r.finite_n_check->n},
                               {"value", r.finite_n_check->value},
                               {"gap", std::abs(r.sigma2 - r.finite_n_check->value)}};
  }
  return j;
}

inline Json to_json(const ConditionProbeReport &r) {
  Json j{{"condition", r.condition},
         {"grid_sizes", r.grid_sizes},
         {"values", r.values},
         {"verdict", to_string(r.verdict)}};
  if (!r.extrapolated.empty()) j["extrapolated"] = r.extrapolated;
  if (r.condition != "C2") {
    j["j"] = r.j;
    j["k"] = r.k;
  }
  if (r.sup_ratio) j["sup_ratio"] = *r.sup_ratio;
  if (r.c0) j["c0"] = *r.c0;
  return j;
}

inline Json to_json(const LinearizationTrace &t) {
  return Json{{"n", t.z.size()},       {"statistic", t.statistic}, {"gamma_bar", t.gamma_bar},
              {"lhs", t.lhs},          {"rhs", t.rhs},             {"residual", t.residual}};
}

inline Json to_json(const MonteCarloReport &r) {
  Json j{{"reps", r.reps},
         {"n", r.n},
         {"gamma_bar", r.gamma_bar},
         {"emp_mean", r.emp_mean},
         {"emp_var", r.emp_var}};
  j["sigma2_model"] = r.sigma2_model ? Json(*r.sigma2_model) : Json(nullptr);
  j["ks_stat"] = r.ks_stat ? Json(*r.ks_stat) : Json(nullptr);
  j["ks_pvalue"] = r.ks_pvalue ? Json(*r.ks_pvalue) : Json(nullptr);
  if (r.sigma2_model && *r.sigma2_model > 0.0) {
    j["var_ratio"] = r.emp_var / *r.sigma2_model;
  }
  return j;
}

inline Json to_json(const SllnTrace &t) {
  return Json{{"n_grid", t.n_grid},
              {"values", t.values},
              {"gamma_bar", t.gamma_bar},
              {"max_abs_dev", t.max_abs_dev},
              {"final_abs_dev", t.final_abs_dev}};
}

inline Json to_json(const SampleBounds &b) {
  return Json{{"lower", b.lower}, {"upper", b.upper}, {"gap", b.upper - b.lower}};
}

inline Json to_json(const CovarianceMatrix &c) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < c.m; ++r) {
    std::vector<double> row(c.values.begin() + static_cast<std::ptrdiff_t>(r * c.m),
                            c.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * c.m));
    rows.push_back(row);
  }
  return Json{{"matrix", rows}, {"quad_error", c.quad_error}};
}

} // namespace mqstat::io

#endif // MQSTAT_IO_HPP
