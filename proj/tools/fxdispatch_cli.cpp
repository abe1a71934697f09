#include <CLI11.hpp>

#include <iostream>

#include "fxdispatch/fxdispatch.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Fixed-time distributed economic dispatch with Kron B-loss"};
  app.require_subcommand(1);

  std::string config_path;
  fxd::CommandOptions opt;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Path to the JSON run configuration")->required();
  };
  auto* run = app.add_subcommand("run", "Simulate and write trajectory.csv and report.json");
  add_config(run);
  run->add_option("--out", opt.out_dir, "Output directory (overrides output.dir)");
  run->add_flag("--force", opt.force, "Simulate even if assumption gates fail");
  run->add_option("--seed", opt.seed, "Disturbance seed");
  run->add_option("--dt", opt.dt, "Integrator step [s]");
  run->add_option("--t-end", opt.t_end, "Simulation horizon [s]");

  auto* check = app.add_subcommand("check", "Evaluate the assumption gates");
  add_config(check);
  auto* bound = app.add_subcommand("bound", "Print the analytic settling-time bound");
  add_config(bound);
  auto* oracle = app.add_subcommand("oracle", "Solve the equilibrium conditions directly");
  add_config(oracle);

  CLI11_PARSE(app, argc, argv);

  fxd::RunConfig cfg;
  try {
    cfg = fxd::load_config(config_path);
    fxd::apply_overrides(cfg, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fxd::kExitValidation;
  }

  try {
    if (*run) return fxd::cmd_run(cfg, opt, std::cout);
    if (*check) return fxd::cmd_check(cfg, std::cout);
    if (*bound) return fxd::cmd_bound(cfg, std::cout);
    return fxd::cmd_oracle(cfg, std::cout);
  } catch (const fxd::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fxd::kExitValidation;
  } catch (const fxd::AssumptionViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fxd::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fxd::kExitRuntime;
  }
}
