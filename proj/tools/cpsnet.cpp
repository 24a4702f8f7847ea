// Command-line front end: run, batch, compare, validate.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cpsnet/harness.hpp"

namespace {

using cpsnet::ExitCode;
using json = nlohmann::json;

int code(ExitCode c) { return static_cast<int>(c); }

json read_summary(const std::string& path) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (fs::is_directory(p)) p /= "summary.json";
  std::ifstream in(p);
  if (!in) throw cpsnet::CompareError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw cpsnet::CompareError(p.string() + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Networked control-loop simulator with programmable-network mitigation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool trace = false;
  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("config", config_path, "Scenario file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Output directory (default: outputs.dir from the config)");
  run->add_flag("--trace", trace, "Write the event trace");

  std::size_t seeds = 1;
  std::size_t jobs = 1;
  auto* batch = app.add_subcommand("batch", "Run consecutive seeds of one scenario");
  batch->add_option("config", config_path, "Scenario file")->required();
  batch->add_option("--seeds", seeds, "Number of seeds")->required()->check(CLI::PositiveNumber);
  batch->add_option("--jobs", jobs, "Parallel instances")->check(CLI::PositiveNumber);
  batch->add_option("--out", out_dir, "Output directory");

  std::string a_path, b_path;
  auto* compare = app.add_subcommand("compare", "Per-metric deltas between two runs");
  compare->add_option("baseline", a_path, "Baseline summary.json or run directory")->required();
  compare->add_option("treatment", b_path, "Treatment summary.json or run directory")->required();

  auto* validate = app.add_subcommand("validate", "Load and validate a scenario");
  validate->add_option("config", config_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(ExitCode::ConfigError);
  }

  try {
    if (*validate) {
      const auto cfg = cpsnet::load_config(config_path);
      std::cout << "ok: " << config_path << " (" << cfg.steps() << " steps, tau " << cfg.resolved_tau() << ")\n";
      return 0;
    }
    if (*run) {
      auto cfg = cpsnet::load_config(config_path);
      if (seed) cfg.seed = *seed;
      cpsnet::RunOptions opts;
      opts.out_dir = out_dir.value_or(cfg.outputs.dir);
      opts.trace = trace;
      const auto result = cpsnet::run_scenario(cfg, opts);
      std::cout << result.summary.dump(2) << "\n";
      if (!result.diagnostic.empty()) std::cerr << result.diagnostic << "\n";
      return code(result.exit_code);
    }
    if (*batch) {
      const auto cfg = cpsnet::load_config(config_path);
      const auto result = cpsnet::run_batch(cfg, seeds, jobs, out_dir);
      if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream(std::filesystem::path(*out_dir) / "batch.json") << result.aggregate.dump(2) << "\n";
      }
      std::cout << result.aggregate.dump(2) << "\n";
      int worst = 0;
      for (const auto& r : result.runs) {
        worst = std::max(worst, code(r.exit_code));
        if (!r.diagnostic.empty()) std::cerr << "seed " << r.summary.value("seed", 0) << ": " << r.diagnostic << "\n";
      }
      return worst;
    }
    if (*compare) {
      const auto report = cpsnet::compare_runs(read_summary(a_path), read_summary(b_path));
      std::cout << report.dump(2) << "\n";
      return 0;
    }
  } catch (const cpsnet::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return code(ExitCode::ConfigError);
  } catch (const cpsnet::CompareError& e) {
    std::cerr << "compare error: " << e.what() << "\n";
    return code(ExitCode::ConfigError);
  }
  return 0;
}
