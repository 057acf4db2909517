#ifndef MQSTAT_CLI_COMMANDS_HPP
#define MQSTAT_CLI_COMMANDS_HPP

// Subcommands of the mqstat tool. Each takes a parsed configuration and
// returns its primary JSON document plus optional CSV side files; run_command
// maps failures to the exit-code contract.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mqstat/asymptotics.hpp"
#include "mqstat/calculus.hpp"
#include "mqstat/errors.hpp"
#include "mqstat/io.hpp"
#include "mqstat/quantile_stat.hpp"
#include "mqstat/simulate.hpp"

namespace mqstat::cli {

using io::Json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitEvaluation = 3;
inline constexpr int kExitDivergence = 4;

inline constexpr const char *kVersion = "0.1.0";

struct Context {
  std::string command;
  Json config = Json::object();
  /// Directory that relative paths in the config are resolved against.
  std::filesystem::path base_dir = ".";
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::optional<std::filesystem::path> out_dir;
  std::string format = "json";
  /// Overrides from flags.
  std::optional<std::string> data_path;
  std::optional<std::string> function;
  std::optional<std::string> name;
};

struct SideFile {
  std::string filename;
  std::string content;
};

struct Output {
  Json primary;
  std::vector<SideFile> files;
};

namespace detail {

inline std::filesystem::path resolve(const Context &ctx, const std::string &p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : ctx.base_dir / path;
}

inline std::string require_readable(const Context &ctx, const std::string &p) {
  const auto path = resolve(ctx, p);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  return path.string();
}

inline std::uint64_t seed_of(const Context &ctx) {
  if (ctx.seed) return *ctx.seed;
  return io::get_or<std::uint64_t>(ctx.config, "seed", 0, "config");
}

inline Margins margins_or_uniform(const Json &cfg, std::size_t d) {
  if (cfg.contains("margins")) return io::margins_from_json(cfg.at("margins"));
  return Margins(d, MarginalModel::uniform());
}

/// Function descriptor from the flag (registry id, JSON object or expression)
/// or from the config.
inline FunctionSpec function_of(const Context &ctx, std::size_t dim_hint, bool uniform) {
  if (ctx.function) {
    const std::string &s = *ctx.function;
    if (!s.empty() && s.front() == '{') {
      Json j;
      try {
        j = Json::parse(s);
      } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("--function: ") + e.what());
      }
      return io::function_from_json(j, dim_hint, uniform);
    }
    try {
      return io::function_from_json(Json(s), dim_hint, uniform);
    } catch (const ConfigError &) {
      return expr::function(s, dim_hint);
    }
  }
  if (!ctx.config.contains("function")) throw ConfigError("config: missing 'function'");
  return io::function_from_json(ctx.config.at("function"), dim_hint, uniform);
}

inline QuadratureOptions quadrature_of(const Json &cfg, unsigned threads) {
  QuadratureOptions q;
  q.threads = threads;
  if (cfg.contains("quadrature")) {
    const auto &j = cfg.at("quadrature");
    io::check_keys(j, {"level", "order"}, "quadrature");
    q.level = io::get_or(j, "level", q.level, "quadrature");
    q.order = io::get_or(j, "order", q.order, "quadrature");
    if (q.level < 3 || q.level > 16) throw ConfigError("quadrature: level must lie in [3,16]");
    if (q.order < 2 || q.order > 8) throw ConfigError("quadrature: order must lie in [2,8]");
  }
  return q;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline std::vector<std::size_t> n_list(const Json &cfg, const char *key,
                                       std::vector<std::size_t> fallback) {
  if (!cfg.contains(key)) return fallback;
  const auto &v = cfg.at(key);
  if (v.is_number_unsigned()) return {v.get<std::size_t>()};
  return io::get<std::vector<std::size_t>>(cfg, key, "config");
}

inline std::string csv_string(const std::vector<std::string> &header,
                              const std::vector<std::vector<double>> &cols) {
  std::ostringstream os;
  io::write_csv(os, header, cols);
  return os.str();
}

} // namespace detail

// ---------------------------------------------------------------------------

inline Output cmd_estimate(const Context &ctx) {
  const auto &cfg = ctx.config;
  io::check_keys(cfg, {"data", "function", "margins"}, "estimate config");
  std::string data = ctx.data_path ? *ctx.data_path : io::get_or<std::string>(cfg, "data", "", "config");
  if (data.empty()) throw ConfigError("estimate: no data file (config 'data' or --data)");
  const auto path = detail::require_readable(ctx, data);
  std::optional<Margins> margins;
  if (cfg.contains("margins")) margins = io::margins_from_json(cfg.at("margins"));

  const auto table = io::read_csv(path);
  const bool uniform = margins && io::all_standard_uniform(*margins);
  const auto f = detail::function_of(ctx, table.batch.d(), uniform);
  const auto r = estimate_statistic(table.batch, f, margins ? &*margins : nullptr);
  Json j = io::to_json(r);
  j["function"] = f.name();
  j["columns"] = table.header;
  return {j, {}};
}

inline Output cmd_bounds(const Context &ctx) {
  const auto &cfg = ctx.config;
  io::check_keys(cfg, {"data", "x", "y"}, "bounds config");
  std::vector<double> x, y;
  std::string data = ctx.data_path ? *ctx.data_path : io::get_or<std::string>(cfg, "data", "", "config");
  if (!data.empty()) {
    const auto table = io::read_csv(detail::require_readable(ctx, data));
    if (table.batch.d() != 2) throw DimensionMismatch("bounds needs exactly two columns");
    x = table.batch.column(0);
    y = table.batch.column(1);
  } else {
    x = io::get<std::vector<double>>(cfg, "x", "config");
    y = io::get<std::vector<double>>(cfg, "y", "config");
  }
  const auto b = broken_sample_bounds(x, y);
  Json j = io::to_json(b);
  j["n"] = x.size();
  return {j, {}};
}

inline Output cmd_variance(const Context &ctx) {
  const auto &cfg = ctx.config;
  io::check_keys(cfg,
                 {"function", "functions", "margins", "copula", "copulas",
                  "independence_for_missing", "finite_n", "quadrature", "check_c3"},
                 "variance config");
  const auto q = detail::quadrature_of(cfg, ctx.threads);
  const std::size_t finite_n = io::get_or<std::size_t>(cfg, "finite_n", 4096, "config");
  if (finite_n == 1) throw ConfigError("finite_n must be 0 (off) or at least 2");
  const bool check_c3 = io::get_or(cfg, "check_c3", true, "config");

  // Dimension from the margins when given, else from the function descriptor.
  std::size_t d = cfg.contains("margins") ? cfg.at("margins").size() : 0;
  std::vector<FunctionSpec> fs;
  Margins margins;
  auto build = [&](const Json &desc, std::size_t hint) {
    const bool uniform = !cfg.contains("margins") ||
                         io::all_standard_uniform(io::margins_from_json(cfg.at("margins")));
    return io::function_from_json(desc, hint, uniform);
  };
  if (cfg.contains("functions")) {
    if (cfg.contains("function") || ctx.function) throw ConfigError("give 'function' or 'functions', not both");
    for (const auto &desc : cfg.at("functions")) fs.push_back(build(desc, d));
  } else if (ctx.function) {
    fs.push_back(detail::function_of(ctx, d, !cfg.contains("margins") ||
                                                 io::all_standard_uniform(io::margins_from_json(cfg.at("margins")))));
  } else {
    if (!cfg.contains("function")) throw ConfigError("config: missing 'function'");
    fs.push_back(build(cfg.at("function"), d));
  }
  if (fs.empty()) throw ConfigError("variance: empty 'functions' list");
  d = fs.front().dim();
  margins = detail::margins_or_uniform(cfg, d);
  for (const auto &f : fs) check_margins(f, margins);
  const auto copulas = io::copula_set_from_json(cfg, d);

  Json j = Json::object();
  Json probes = Json::array();
  if (check_c3) {
    // sigma^2 is only meaningful when the gradient growth condition holds.
    for (const auto &f : fs) {
      for (std::size_t a = 0; a < d; ++a) {
        const auto p = probe_c3(f, margins, a, a);
        probes.push_back(io::to_json(p.grad));
        if (p.grad.verdict == Verdict::diverging) {
          throw DivergenceError("gradient growth condition fails for " + f.name() + " (coordinate " +
                                    std::to_string(a) + "); sigma2 is not defined",
                                p.grad.values);
        }
      }
    }
  }
  if (fs.size() == 1) {
    auto r = sigma_squared(fs[0], margins, copulas, q);
    if (finite_n >= 2) {
      r.finite_n_check = FiniteNCheck{finite_n, finite_n_variance(fs[0], margins, copulas, finite_n, ctx.threads)};
    }
    j = io::to_json(r);
  } else {
    const auto cm = covariance_matrix(fs, margins, copulas, q);
    j = io::to_json(cm);
  }
  if (check_c3) j["c3_probes"] = probes;
  return {j, {}};
}

inline Output cmd_mc(const Context &ctx) {
  const auto &cfg = ctx.config;
  io::check_keys(cfg,
                 {"function", "margins", "generator", "n", "reps", "seed", "mode", "n_grid",
                  "sigma2", "quadrature"},
                 "mc config");
  const auto seed = detail::seed_of(ctx);
  const auto mode = io::get_or<std::string>(cfg, "mode", "clt", "config");
  const Json gen_json = cfg.contains("generator") ? cfg.at("generator") : Json{{"kind", "independent"}};
  const auto q = detail::quadrature_of(cfg, ctx.threads);

  // Dimension: margins if given, else the function's own.
  std::size_t d = cfg.contains("margins") ? cfg.at("margins").size() : 0;
  const bool uniform = !cfg.contains("margins") ||
                       io::all_standard_uniform(io::margins_from_json(cfg.at("margins")));
  const auto f = detail::function_of(ctx, d, uniform);
  d = f.dim();
  const auto margins = detail::margins_or_uniform(cfg, d);
  check_margins(f, margins);

  if (mode == "clt") {
    const auto n = io::get<std::size_t>(cfg, "n", "config");
    const auto reps = io::get_or<std::size_t>(cfg, "reps", 1000, "config");
    if (n == 0 || reps < 2) throw ConfigError("mc: need n >= 1 and reps >= 2");
    const auto spec = io::generator_from_json(gen_json, margins, n, seed);
    MonteCarloOptions opt;
    opt.reps = reps;
    opt.threads = ctx.threads;
    opt.quadrature = q;
    if (cfg.contains("sigma2")) opt.sigma2 = io::get<double>(cfg, "sigma2", "config");
    const auto r = mc_clt(f, spec, opt);
    Json j = io::to_json(r);
    j["seed"] = seed;
    j["generator"] = to_string(spec.kind) + (spec.antithetic ? "+antithetic" : "");
    std::vector<double> idx(r.values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<double>(i);
    return {j, {{"mc_replications.csv", detail::csv_string({"rep", "centered_scaled"}, {idx, r.values})}}};
  }
  if (mode == "slln") {
    const auto grid = detail::n_list(cfg, "n_grid", {100, 1000, 10000, 100000});
    const auto spec = io::generator_from_json(gen_json, margins, grid.empty() ? 1 : grid.back(), seed);
    const auto t = mc_slln(f, spec, grid);
    Json j = io::to_json(t);
    j["seed"] = seed;
    std::vector<double> ns(t.n_grid.begin(), t.n_grid.end());
    return {j, {{"mc_slln.csv", detail::csv_string({"n", "statistic"}, {ns, t.values})}}};
  }
  throw ConfigError("mc: unknown mode '" + mode + "' (clt or slln)");
}

inline Output cmd_probe(const Context &ctx) {
  const auto &cfg = ctx.config;
  io::check_keys(cfg, {"function", "margins", "conditions", "pairs", "c0"}, "probe config");
  std::size_t d = cfg.contains("margins") ? cfg.at("margins").size() : 0;
  const bool uniform = !cfg.contains("margins") ||
                       io::all_standard_uniform(io::margins_from_json(cfg.at("margins")));
  const auto f = detail::function_of(ctx, d, uniform);
  d = f.dim();
  const auto margins = detail::margins_or_uniform(cfg, d);
  check_margins(f, margins);
  const auto conditions =
      io::get_or<std::vector<std::string>>(cfg, "conditions", {"c2", "c3"}, "config");
  const double c0 = io::get_or(cfg, "c0", 0.1, "config");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (cfg.contains("pairs")) {
    for (const auto &p : io::get<std::vector<std::vector<std::size_t>>>(cfg, "pairs", "config")) {
      if (p.size() != 2 || p[0] >= d || p[1] >= d) throw ConfigError("probe: bad pair");
      pairs.emplace_back(p[0], p[1]);
    }
  } else {
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) pairs.emplace_back(a, b);
  }
  for (const auto &c : conditions) {
    if (c != "c2" && c != "c3") throw ConfigError("probe: unknown condition '" + c + "'");
  }
  Json reports = Json::array();
  for (const auto &c : conditions) {
    if (c == "c2") {
      reports.push_back(io::to_json(probe_c2(f, margins, c0)));
    } else {
      for (const auto &[a, b] : pairs) {
        const auto p = probe_c3(f, margins, a, b);
        reports.push_back(io::to_json(p.grad));
        reports.push_back(io::to_json(p.hess));
      }
    }
  }
  return {Json{{"function", f.name()}, {"reports", reports}}, {}};
}

inline Output cmd_counterexample(const Context &ctx) {
  const auto &cfg = ctx.config;
  io::check_keys(cfg, {"name", "n", "seeds", "seed", "comonotone"}, "counterexample config");
  std::string name = ctx.name ? *ctx.name : io::get_or<std::string>(cfg, "name", "", "config");
  const auto seed = detail::seed_of(ctx);
  if (name == "c1") {
    const auto ns = detail::n_list(cfg, "n", {10, 1000, 100000});
    const auto seeds = io::get_or<std::size_t>(cfg, "seeds", 10, "config");
    const bool comonotone = io::get_or(cfg, "comonotone", false, "config");
    Json rows = Json::array();
    bool all_zero = true;
    for (std::size_t n : ns) {
      if (n == 0) throw ConfigError("counterexample: n must be positive");
      std::vector<CounterexampleC1> res(seeds);
      parallel_for(seeds, ctx.threads, [&](std::size_t s) {
        res[s] = counterexample_c1(n, child_seed(seed, s), comonotone);
      });
      double max_stat = 0.0, min_stat = 1.0;
      for (const auto &r : res) {
        max_stat = std::max(max_stat, r.statistic);
        min_stat = std::min(min_stat, r.statistic);
      }
      all_zero = all_zero && max_stat == 0.0;
      rows.push_back(Json{{"n", n},
                          {"seeds", seeds},
                          {"statistic_min", min_stat},
                          {"statistic_max", max_stat},
                          {"gamma_bar", res.empty() ? 1.0 : res.front().gamma_bar}});
    }
    return {Json{{"name", "c1"}, {"comonotone", comonotone}, {"seed", seed}, {"rows", rows},
                 {"statistic_always_zero", all_zero}},
            {}};
  }
  if (name == "c2") {
    const auto ns = detail::n_list(cfg, "n", {1000, 10000, 100000});
    const auto seeds = io::get_or<std::size_t>(cfg, "seeds", 50, "config");
    if (seeds == 0) throw ConfigError("counterexample: seeds must be positive");
    Json rows = Json::array();
    std::vector<double> csv_n, csv_seed, csv_stat, csv_witness;
    for (std::size_t n : ns) {
      if (n == 0) throw ConfigError("counterexample: n must be positive");
      std::vector<CounterexampleC2> res(seeds);
      parallel_for(seeds, ctx.threads, [&](std::size_t s) {
        res[s] = counterexample_c2(n, child_seed(seed, s));
      });
      std::vector<double> stats, witness;
      for (std::size_t s = 0; s < seeds; ++s) {
        stats.push_back(res[s].statistic);
        witness.push_back(res[s].witness);
        csv_n.push_back(static_cast<double>(n));
        csv_seed.push_back(static_cast<double>(s));
        csv_stat.push_back(res[s].statistic);
        csv_witness.push_back(res[s].witness);
      }
      const double rn = std::sqrt(static_cast<double>(n));
      const double med = detail::median(stats);
      rows.push_back(Json{{"n", n},
                          {"seeds", seeds},
                          {"median_statistic", med},
                          {"median_over_sqrt_n", med / rn},
                          {"median_witness", detail::median(witness)},
                          {"gamma_bar", 1.0}});
    }
    const auto probe = probe_c2(functions::growth_example(),
                                {MarginalModel::uniform(), MarginalModel::uniform()}, 0.1);
    return {Json{{"name", "c2"}, {"seed", seed}, {"rows", rows}, {"c2_probe", io::to_json(probe)}},
            {{"counterexample_c2.csv",
              detail::csv_string({"n", "seed_index", "statistic", "witness"},
                                 {csv_n, csv_seed, csv_stat, csv_witness})}}};
  }
  if (name.empty()) throw ConfigError("counterexample: no name given (c1 or c2)");
  throw ConfigError("counterexample: unknown name '" + name + "' (c1 or c2)");
}

// ---------------------------------------------------------------------------

/// Flattens a JSON document to "key,value" lines with dotted paths.
inline void flatten(const Json &j, const std::string &prefix, std::ostream &os) {
  if (j.is_object()) {
    for (const auto &item : j.items()) {
      flatten(item.value(), prefix.empty() ? item.key() : prefix + "." + item.key(), os);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), os);
  } else if (j.is_number_float()) {
    os << prefix << "," << io::format_double(j.get<double>()) << '\n';
  } else if (j.is_string()) {
    os << prefix << "," << j.get<std::string>() << '\n';
  } else {
    os << prefix << "," << j.dump() << '\n';
  }
}

inline std::string render(const Json &j, const std::string &format) {
  if (format == "csv") {
    std::ostringstream os;
    os << "key,value\n";
    flatten(j, "", os);
    return os.str();
  }
  return j.dump(2) + "\n";
}

inline Output dispatch(const Context &ctx) {
  if (ctx.command == "estimate") return cmd_estimate(ctx);
  if (ctx.command == "variance") return cmd_variance(ctx);
  if (ctx.command == "mc") return cmd_mc(ctx);
  if (ctx.command == "probe") return cmd_probe(ctx);
  if (ctx.command == "counterexample") return cmd_counterexample(ctx);
  if (ctx.command == "bounds") return cmd_bounds(ctx);
  throw ConfigError("unknown command '" + ctx.command + "'");
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Runs one command, writing the primary document to `out` and diagnostics to
/// `err`. With an output directory, the primary document, side files and a
/// metadata file (timestamp, thread count) are written there as well.
inline int run_command(const Context &ctx, std::ostream &out, std::ostream &err) {
  try {
    if (ctx.format != "json" && ctx.format != "csv") {
      throw ConfigError("--format must be json or csv");
    }
    if (ctx.out_dir) {
      std::error_code ec;
      std::filesystem::create_directories(*ctx.out_dir, ec);
      if (ec || !std::filesystem::is_directory(*ctx.out_dir)) {
        throw ConfigError("cannot create output directory '" + ctx.out_dir->string() + "'");
      }
    }
    const Output o = dispatch(ctx);
    const std::string text = render(o.primary, ctx.format);
    out << text;
    if (ctx.out_dir) {
      auto write = [&](const std::string &name, const std::string &content) {
        std::ofstream f(*ctx.out_dir / name, std::ios::binary);
        if (!f) throw ConfigError("cannot write '" + (*ctx.out_dir / name).string() + "'");
        f << content;
      };
      write(ctx.command + (ctx.format == "csv" ? ".csv" : ".json"), text);
      for (const auto &sf : o.files) write(sf.filename, sf.content);
      const Json meta{{"command", ctx.command},
                      {"timestamp", utc_timestamp()},
                      {"threads", ctx.threads},
                      {"version", kVersion}};
      write(ctx.command + ".meta.json", meta.dump(2) + "\n");
    }
    return kExitOk;
  } catch (const DivergenceError &e) {
    err << "error: divergence: " << e.what() << '\n';
    if (!e.trace().empty()) {
      err << "trace:";
      for (double v : e.trace()) err << ' ' << io::format_double(v);
      err << '\n';
    }
    return kExitDivergence;
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionMismatch &e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParameterError &e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const EvaluationError &e) {
    err << "error: evaluation: " << e.what();
    if (e.index() != EvaluationError::npos) err << " (index " << e.index() << ")";
    err << '\n';
    return kExitEvaluation;
  } catch (const std::exception &e) {
    err << "error: evaluation: " << e.what() << '\n';
    return kExitEvaluation;
  }
}

} // namespace mqstat::cli

#endif // MQSTAT_CLI_COMMANDS_HPP
