// lga: experiment runner.
//
//   lga <experiment> [--config file.json] --out <dir> [--seed N] [--trials T] [--preset desk|paper]
//
// Exit codes: 0 success, 1 failed check (propcheck, gradcheck),
// 2 config error, 3 runtime or numerical failure.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lga/config.hpp"
#include "lga/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void print_report(const lga::ExperimentReport& rep) {
  for (const auto& c : rep.checks) {
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << rep.experiment << '/' << c.name << "  value=" << c.value
              << "  threshold=" << c.threshold << "  (" << c.detail << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label gradient alignment experiments"};
  std::string experiment;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> preset;
  app.add_option("experiment", experiment, "learnspeed | rings | propcheck | gradcheck | linreg-oracle")->required();
  app.add_option("--config", config_path, "JSON config; keys override the preset");
  app.add_option("--out", out_dir, "run directory")->required();
  app.add_option("--seed", seed, "master seed");
  app.add_option("--trials", trials, "rings trials");
  app.add_option("--preset", preset, "desk | paper");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  lga::RunConfig cfg;
  try {
    std::optional<lga::Json> file;
    if (!config_path.empty()) file = lga::read_json_file(config_path);
    std::string name = "desk";
    if (preset) {
      name = *preset;
    } else if (file && file->contains("preset") && (*file)["preset"].is_string()) {
      name = (*file)["preset"].get<std::string>();
    }
    cfg = lga::preset_config(name);
    if (file) cfg = lga::apply_json(cfg, *file);
    cfg.preset = name;
    cfg.experiment = experiment;
    if (seed) cfg.seed = *seed;
    if (trials) cfg.trials = *trials;
    lga::validate(cfg);
  } catch (const lga::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const lga::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const auto rep = lga::run_experiment(cfg, out_dir);
    print_report(rep);
    std::cout << "wrote " << out_dir << '\n';
    return rep.asserting && !rep.passed() ? kExitCheckFailed : kExitOk;
  } catch (const lga::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const lga::NumericalError& e) {
    std::cerr << "numerical error at iteration " << e.iteration() << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
