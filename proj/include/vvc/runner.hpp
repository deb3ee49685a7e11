#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "vvc/config.hpp"

namespace vvc::cli {

// Runs every seed of a resolved experiment. Each seed gets its own run
// directory with metrics.csv, checkpoints, a rerunnable manifest, plot
// data, and (when configured) the failure schedule actually applied.
// Returns 0 when every seed completed, 2 when any seed failed.
int run_experiment(const LoadedExperiment& exp, std::ostream& log);

// Builds <output_dir>/<algorithm>_seed<seed>.
std::string run_directory(const ExperimentConfig& cfg, std::uint64_t seed);

// Cross-run median / min-max tables per method plus a communication
// report. Throws on mismatched metrics schemas.
void summarize_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                    std::ostream& log);

}  // namespace vvc::cli
