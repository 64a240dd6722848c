#include <iostream>

#include <CLI11.hpp>

#include "callias/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"calliaslab: index, spectral flow and relative eta on discretised Callias-type operators"};
  app.require_subcommand(1);

  callias::RunFlags flags;
  std::string positional, config;
  int workers = 0;
  std::string out, cache;
  CLI::App* run = app.add_subcommand("run", "Run the scenario described by a TOML config");
  run->add_option("config_file", positional, "Config file");
  run->add_option("--config", config, "Config file (alternative to the positional form)");
  run->add_option("--out", out, "Output directory (overrides [output].dir)");
  run->add_option("--workers", workers, "Worker threads (overrides [run].workers)")->check(CLI::PositiveNumber);
  run->add_option("--cache-dir", cache, "Spectral store directory");
  run->add_option("--suite", flags.suite, "Run only the named suite checks")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : callias::kExitSchema;
  }

  if (positional.empty() == config.empty()) {
    std::cerr << "error: give the config either positionally or with --config\n";
    return callias::kExitSchema;
  }
  flags.config = positional.empty() ? config : positional;
  if (!out.empty()) flags.out = out;
  if (workers > 0) flags.workers = workers;
  if (!cache.empty()) flags.cache_dir = cache;
  return callias::run(flags, std::cerr);
}
