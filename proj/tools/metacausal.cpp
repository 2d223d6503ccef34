#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "metacausal/experiments.hpp"

namespace ex = metacausal::experiments;

int main(int argc, char** argv) {
  CLI::App app{"Meta-transfer structure learning experiments"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path, out_dir = ".", profile = "desk";
  int workers = 1;
  app.add_option("--seed", seed, "master seed")->required();
  app.add_option("--config", config_path, "key=value config file with an [experiment] header");
  app.add_option("--out-dir", out_dir, "directory for CSV outputs and manifest.json");
  app.add_option("--profile", profile, "desk or paper defaults")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--workers", workers, "parallel runs")->check(CLI::PositiveNumber);
  for (const auto& name : ex::experiment_names()) app.add_subcommand(name, "run the " + name + " experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ex::RunRequest req;
    req.experiment = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) req.config = ex::Config::load(config_path);
    req.seed = seed;
    req.profile = ex::parse_profile(profile);
    req.out_dir = out_dir;
    req.workers = workers;
    const ex::RunManifest m = ex::run_experiment(req);
    for (const auto& f : m.outputs) std::cout << (req.out_dir / f).string() << '\n';
    return 0;
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const metacausal::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
