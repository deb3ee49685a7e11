#pragma once

#include <map>
#include <string>
#include <vector>

#include "vvc/benchmarks.hpp"
#include "vvc/env.hpp"

namespace vvc::cli {

inline constexpr const char* kVersion = "0.1.0";

enum class Algorithm { Cmarl, Sac, Admm };
std::string algorithm_name(Algorithm a);

struct ExperimentConfig {
  // [experiment]
  std::string feeder_path;
  Algorithm algorithm = Algorithm::Cmarl;
  std::string output_dir = "out";
  long horizon_hours = 0;
  long history_hours = 720;
  std::vector<std::uint64_t> seeds;

  // [loads]
  std::string load_source = "synth";  // synth | csv
  int load_weeks = 52;
  std::uint64_t load_seed = 1;
  std::string load_csv_path;

  // [rewards]
  env::RewardConstants rewards;

  // [training]
  consensus::Hyper hyper;
  std::size_t replay_capacity = 50000;
  env::CapMeterRule cap_rule = env::CapMeterRule::Incident;
  consensus::StepTrigger trigger = consensus::StepTrigger::GlobalCount;

  // [graph]  edges between device names; defaults to a chain in file order
  std::vector<std::pair<std::string, std::string>> edge_names;

  // [failures]
  std::string failure_schedule_path;
  double agent_failure_rate = 0.0;
  double link_failure_rate = 0.0;
  double failure_duration_p = 0.2;
  std::uint64_t failure_seed = 1;
  bool failures_configured() const {
    return !failure_schedule_path.empty() || agent_failure_rate > 0.0 ||
           link_failure_rate > 0.0;
  }
};

// Flat "key = value" records under [section] headers; '#' starts a comment.
using RawConfig = std::map<std::string, std::string>;  // "section.key" -> value
RawConfig parse_config_text(const std::string& text);
RawConfig parse_config_file(const std::string& path);

// Size-class defaults (4-, 34-, 123-bus columns).
int default_hidden(Algorithm algo, int bus_count);
double default_alpha(int bus_count);

// Fully resolved experiment: config with defaults applied, the loaded
// feeder, and the communication graph in device indices. `errors` names
// every violated invariant; the rest of the struct is only meaningful when
// it is empty.
struct LoadedExperiment {
  ExperimentConfig cfg;
  feeder::FeederModel feeder;
  std::vector<std::pair<int, int>> graph_edges;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

LoadedExperiment load_experiment_text(const std::string& text, const std::string& base_dir);
LoadedExperiment load_experiment(const std::string& config_path);

// Canonical echo of a resolved config; parseable as a config file, which
// makes run manifests rerunnable.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace vvc::cli
