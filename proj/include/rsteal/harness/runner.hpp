#pragma once

#include <string>
#include <vector>

#include "rsteal/harness/config.hpp"

namespace rsteal::harness {

// Subcommand bodies behind the CLI; each prints its results to stdout and
// returns a process exit code.

int cmd_train_target(const ExperimentConfig& cfg);

// --dry-run prints the resolved config with the computed query budget and
// returns without loading data, querying, or writing anything.
int cmd_attack(const ExperimentConfig& cfg, bool dry_run);

int cmd_eval(const std::string& model_path, const std::string& dataset,
             const std::string& data_dir, int64_t samples, uint64_t seed);

// Prints eps, transfer ASR and the matched random-noise ASR per grid point.
int cmd_transfer(const std::string& surrogate_path, const std::string& target_path,
                 const std::string& dataset, const std::string& data_dir, int64_t samples,
                 const std::vector<double>& eps_grid, uint64_t seed);

int cmd_toy_boundary(const std::string& method, int steps, uint64_t seed,
                     const std::string& out_dir, bool render, int points_per_class);

// Collects <runs_dir>/<strategy>/report.json for AT/UE/AE/HEE into the
// query-strategy comparison CSV (strategy, clean, robust, scale rows).
int cmd_table(const std::string& which, const std::string& scale, const std::string& runs_dir,
              const std::string& out_csv);

} // namespace rsteal::harness
