// transmute_lab <experiment> --config path.json [--jobs N] [--out dir]

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "transmute/experiments.hpp"

int main(int argc, char** argv) {
  namespace lab = transmute::lab;
  CLI::App app{"Inverse source problem lab: forward solves, identification, kernels, stability sweeps"};
  std::string experiment;
  std::string config_path;
  std::string out_dir;
  int jobs = 1;
  app.add_option("experiment", experiment,
                 "forward | identify | kernel | transmute | reconstruct_initial | stability_sweep")
      ->required();
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--jobs", jobs, "worker threads for the noise sweep")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  lab::RunConfig cfg;
  try {
    cfg = lab::load_config(config_path);
    const auto exp = lab::parse_experiment(experiment);
    if (cfg.echo.contains("experiment") && cfg.experiment != exp)
      throw transmute::Error(transmute::ErrorCode::config,
                             "config experiment '" + std::string(lab::to_string(cfg.experiment)) +
                                 "' does not match the command line");
    cfg.experiment = exp;
    lab::apply_seed_override(cfg, std::getenv("TRANSMUTE_LAB_SEED"));
  } catch (const transmute::Error& e) {
    std::cerr << "transmute_lab: " << e.what() << '\n';
    return 2;
  }

  const auto outcome = lab::run(cfg, out_dir.empty() ? cfg.output_dir : out_dir, jobs);
  for (const auto& ch : outcome.report["checks"])
    std::cout << (ch["passed"].get<bool>() ? "[PASS] " : "[FAIL] ") << ch["name"].get<std::string>() << ' '
              << ch["value"].dump() << ' ' << ch["relation"].get<std::string>() << ' ' << ch["threshold"].dump()
              << '\n';
  if (outcome.report.contains("error")) std::cerr << "transmute_lab: " << outcome.report["error"].get<std::string>() << '\n';
  std::cout << "status: " << outcome.report["status"].get<std::string>() << '\n';
  return outcome.exit_code;
}
