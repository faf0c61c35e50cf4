// Command-line experiment runner:
//   isoricci <experiment> [--config FILE] [--out DIR] [--jobs N]

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isoricci/experiment.hpp"

int main(int argc, char** argv) {
  using namespace isoricci;
  std::vector<std::string> names;
  for (const auto& e : experiments()) names.push_back(e.name);

  CLI::App app{"Isoperimetric profile and Ricci flow experiments"};
  RunRequest req;
  bool list = false;
  app.add_option("experiment", req.experiment, "experiment to run")->check(CLI::IsMember(names));
  app.add_option("--config", req.config_path, "flat key = value config file");
  app.add_option("--out", req.out_dir, "output directory");
  app.add_option("--jobs", req.jobs, "worker threads for independent sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--list", list, "list experiments and their config keys");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_config_error;
  }

  if (list) {
    for (const auto& e : experiments()) {
      std::cout << e.name << ": " << e.summary << '\n';
      for (const auto& p : e.params) std::cout << "  " << p.key << " = " << p.fallback << "  # " << p.help << '\n';
    }
    return exit_pass;
  }
  if (req.experiment.empty()) {
    std::cerr << "error: no experiment given (see --list)\n";
    return exit_config_error;
  }
  return run_experiment(req, std::cout, std::cerr);
}
