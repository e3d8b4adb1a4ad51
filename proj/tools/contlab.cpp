#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "contlab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"contlab: characteristic solvers and stability certificates for transport problems"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string mode_name = "simulate";
  std::uint64_t seed = 1;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  run->add_option("--mode", mode_name, "simulate | certify | oracle-compare | experiments | sweep");
  run->add_option("--seed", seed, "seed for randomized campaigns");
  run->add_option("--out", out_dir, "output directory (default: $CONTLAB_OUT or .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << contlab::error_json("usage", e.what()).dump() << '\n';
    return 2;
  }

  const auto mode = contlab::mode_from_string(mode_name);
  if (!mode) {
    std::cout << contlab::error_json("usage", "unknown mode '" + mode_name + "'").dump() << '\n';
    return 2;
  }
  contlab::RunOptions opt;
  opt.seed = seed;
  if (!out_dir.empty()) {
    opt.out_dir = out_dir;
  } else if (const char* env = std::getenv("CONTLAB_OUT"); env && *env) {
    opt.out_dir = env;
  }

  try {
    const auto scenario = contlab::load_scenario(scenario_path);
    const auto result = contlab::run(scenario, *mode, opt);
    auto summary = result.summary;
    summary["artifacts"] = result.artifacts;
    std::cout << summary.dump(2) << '\n';
    return result.exit_code();
  } catch (const contlab::ScenarioError& e) {
    std::cout << contlab::error_json("scenario", "invalid scenario", e.problems()).dump(2) << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cout << contlab::error_json("runtime", e.what()).dump(2) << '\n';
    return 3;
  }
}
