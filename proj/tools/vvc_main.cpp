#include <CLI11.hpp>
#include <iostream>

#include "vvc/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Consensus multi-agent Volt-VAR control experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir_override;
  std::string seed_override;
  std::string log_level = "info";

  auto* run = app.add_subcommand("run", "Run every seed of an experiment config");
  run->add_option("-c,--config", config_path, "experiment config file")->required();
  run->add_option("--output-dir", output_dir_override, "override [experiment] output_dir");
  run->add_option("--seed", seed_override, "override the seed list (space separated)");
  run->add_option("--log-level", log_level, "info|quiet");

  auto* validate = app.add_subcommand("validate", "Statically validate a config");
  validate->add_option("-c,--config", config_path, "experiment config file")->required();

  std::vector<std::string> run_dirs;
  std::string summary_out = "summary";
  auto* summarize =
      app.add_subcommand("summarize", "Median and min/max bands across completed runs");
  summarize->add_option("dirs", run_dirs, "run directories")->required();
  summarize->add_option("-o,--output-dir", summary_out, "summary output directory");
  summarize->add_option("--log-level", log_level, "info|quiet");

  CLI11_PARSE(app, argc, argv);

  std::ostream& log = std::cout;
  std::ostringstream null_sink;
  std::ostream& sink = log_level == "quiet" ? static_cast<std::ostream&>(null_sink) : log;

  try {
    if (validate->parsed()) {
      const auto exp = vvc::cli::load_experiment(config_path);
      if (exp.ok()) {
        log << "config ok: " << config_path << "\n";
        return 0;
      }
      for (const auto& e : exp.errors) log << "error: " << e << "\n";
      return 1;
    }

    if (run->parsed()) {
      auto exp = vvc::cli::load_experiment(config_path);
      if (!output_dir_override.empty()) exp.cfg.output_dir = output_dir_override;
      if (!seed_override.empty()) {
        exp.cfg.seeds.clear();
        std::istringstream seeds(seed_override);
        std::string tok;
        while (seeds >> tok) exp.cfg.seeds.push_back(std::stoull(tok));
        if (exp.cfg.seeds.empty()) {
          log << "error: --seed gave no seeds\n";
          return 1;
        }
      }
      if (!exp.ok()) {
        for (const auto& e : exp.errors) log << "error: " << e << "\n";
        return 1;
      }
      return vvc::cli::run_experiment(exp, sink);
    }

    if (summarize->parsed()) {
      vvc::cli::summarize_runs(run_dirs, summary_out, sink);
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "fatal: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
