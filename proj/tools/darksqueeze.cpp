// darksqueeze: simulate and analyze dark-state adiabatic generation of
// squeezed states in an atom-cavity system.
//
// Subcommands: derive | budget | evolve | sweep | oracle.  Configuration is
// a flat key = value file; --set key=value overrides individual entries.
// Exit codes: 0 success, 1 configuration error, 2 numerical-validity failure.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "darksqueeze/cli.hpp"

using namespace darksqueeze;

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dark-state adiabatic squeezing simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "configuration file")->required();
    sub->add_option("--set", overrides, "override key=value");
    sub->add_option("--out", out_path, "override the output path");
  };

  auto* derive = app.add_subcommand("derive", "print derived couplings");
  add_common(derive);
  auto* budget = app.add_subcommand("budget", "print the adiabatic error budget");
  add_common(budget);
  auto* evolve = app.add_subcommand("evolve", "run the configured protocol");
  add_common(evolve);

  auto* sweep = app.add_subcommand("sweep", "run the protocol over a parameter grid");
  add_common(sweep);
  std::string sweep_param, sweep_values;
  sweep->add_option("--param", sweep_param, "config key to sweep")->required();
  sweep->add_option("--values", sweep_values, "comma-separated grid values")->required();

  auto* oracle = app.add_subcommand("oracle", "run the cross-level validation suite");
  add_common(oracle);
  bool negative_only = false;
  oracle->add_flag("--negative-control", negative_only,
                   "run only the perturbed-transform controls");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config_path, overrides);
    if (!out_path.empty()) cfg.output = out_path;

    if (derive->parsed()) return cli::cmd_derive(cfg, std::cout);
    if (budget->parsed()) return cli::cmd_budget(cfg, std::cout);
    if (evolve->parsed()) return cli::cmd_evolve(cfg, std::cout);
    if (sweep->parsed()) {
      cli::SweepSpec spec{sweep_param, parse_values(sweep_values)};
      return cli::cmd_sweep(cfg, spec, std::cout);
    }
    if (oracle->parsed()) return cli::cmd_oracle(cfg, negative_only, std::cout);
  } catch (const NumericValidityError& e) {
    std::cerr << "numerical validity failure: " << e.what() << "\n";
    return cli::kExitNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitConfigError;
  }
  return cli::kExitConfigError;
}
