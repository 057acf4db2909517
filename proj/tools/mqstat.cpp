#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mqstat/cli_commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 1;
  std::string format = "json";
  std::string data;
  std::string function;
  std::string name;
};

void add_common(CLI::App *sub, Flags &f) {
  sub->add_option("--config", f.config, "JSON configuration file");
  sub->add_option("--seed", f.seed, "master seed (overrides the config)");
  sub->add_option("--out", f.out, "directory for result files");
  sub->add_option("--threads", f.threads, "worker cap")->check(CLI::Range(1u, 256u));
  sub->add_option("--format", f.format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"mqstat: mean of a function of marginal sample quantiles"};
  app.require_subcommand(1);
  Flags f;
  auto *estimate = app.add_subcommand("estimate", "T_n of a CSV sample");
  auto *variance = app.add_subcommand("variance", "limiting variance by quadrature");
  auto *mc = app.add_subcommand("mc", "Monte Carlo CLT or SLLN experiment");
  auto *probe = app.add_subcommand("probe", "growth-condition probes");
  auto *counter = app.add_subcommand("counterexample", "c1 or c2 reproduction");
  auto *bounds = app.add_subcommand("bounds", "broken-sample bounds of two columns");
  for (auto *s : {estimate, variance, mc, probe, counter, bounds}) add_common(s, f);
  for (auto *s : {estimate, bounds}) s->add_option("--data", f.data, "CSV file with a header row");
  for (auto *s : {estimate, variance, mc, probe}) {
    s->add_option("--function", f.function, "registry id, JSON descriptor or expression");
  }
  counter->add_option("name", f.name, "c1 or c2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mqstat::cli::kExitConfig;
  }

  mqstat::cli::Context ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  ctx.threads = f.threads;
  ctx.format = f.format;
  auto *sub = app.get_subcommands().front();
  if (sub->count("--seed")) ctx.seed = f.seed;
  if (!f.out.empty()) ctx.out_dir = f.out;
  if (!f.data.empty()) ctx.data_path = f.data;
  if (!f.function.empty()) ctx.function = f.function;
  if (!f.name.empty()) ctx.name = f.name;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) {
      std::cerr << "error: cannot read config '" << f.config << "'\n";
      return mqstat::cli::kExitConfig;
    }
    try {
      ctx.config = mqstat::io::Json::parse(in);
    } catch (const nlohmann::json::exception &e) {
      std::cerr << "error: config '" << f.config << "': " << e.what() << '\n';
      return mqstat::cli::kExitConfig;
    }
    if (!ctx.config.is_object()) {
      std::cerr << "error: config must be a JSON object\n";
      return mqstat::cli::kExitConfig;
    }
    ctx.base_dir = std::filesystem::path(f.config).parent_path();
    if (ctx.base_dir.empty()) ctx.base_dir = ".";
  }
  return mqstat::cli::run_command(ctx, std::cout, std::cerr);
}
