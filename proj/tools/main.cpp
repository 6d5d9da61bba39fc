#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "edgeheat/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Biharmonic heat kernels and Cahn-Hilliard flow on model cones and edges"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  auto* run = app.add_subcommand("run", "run the task described by a JSON config");
  run->add_option("--config", config, "config file")->required();
  run->add_option("--out", out, "output directory (overrides the config)");
  app.add_subcommand("list-checks", "list every verification check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    std::optional<std::filesystem::path> dir;
    if (!out.empty()) dir = out;
    return edgeheat::run_command(config, dir, std::cout, std::cerr);
  }
  std::cout << edgeheat::list_checks_text();
  return 0;
}
