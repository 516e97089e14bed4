#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blowup/errors.hpp"
#include "blowup/harness/experiments.hpp"

namespace harness = blowup::harness;

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on finite-time blow-up and controlled explosions"};
  app.set_version_flag("--version", std::string(harness::kToolVersion));

  std::vector<std::string> names;
  for (auto experiment : harness::all_experiments()) names.emplace_back(harness::to_string(experiment));

  std::string experiment_name;
  std::string config_path;
  std::string out_dir;
  int workers = 1;
  bool force = false;
  app.add_option("experiment", experiment_name, "Experiment to run")->required()->check(CLI::IsMember(names));
  app.add_option("--config", config_path, "TOML config file; omitted keys take their defaults")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (default: $" + std::string(harness::kOutputEnv) +
                                       ", then ./blowup_out)");
  app.add_option("--workers", workers, "Worker threads for sweeps")->check(CLI::Range(1, 1024));
  app.add_flag("--force", force, "Run even below the domination gate (logged)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const auto config = config_path.empty() ? harness::Config{} : harness::Config::load(config_path);
    harness::RunOptions options;
    options.out_dir = out_dir;
    options.workers = workers;
    options.force = force;
    options.log = &std::cerr;
    const int code = harness::run(*harness::parse_experiment(experiment_name), config, options);
    std::cerr << "artifacts in " << harness::output_directory(options).string() << '\n';
    return code;
  } catch (const harness::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const blowup::ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
