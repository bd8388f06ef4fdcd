#pragma once

#include <cstdint>
#include <string>

#include "rsteal/clonetrain.hpp"
#include "rsteal/targetzoo.hpp"

namespace rsteal::harness {

// Fully resolved experiment description. resolve_config() fills every field
// from JSON + defaults, so serializing and re-resolving is a fixed point.
struct ExperimentConfig {
    uint64_t seed = 0;
    std::string dataset = "cifar10";
    std::string data_dir = "data";
    std::string run_dir = "runs";
    std::string run_name = "run";
    int64_t train_subset = 0;    // 0 = full split
    int64_t synth_train = 10000; // sample counts for procedural datasets
    int64_t synth_test = 2000;

    TargetRecipe target;
    std::string target_path; // victim checkpoint consumed by `attack`

    TrainConfig attack;

    std::string to_json() const;
};

// Parses JSON text, applies the per-dataset defaults to absent keys
// (cifar100-scale runs get batch 512, smoothing 0.02, 15 synthesis iters
// with lr_gen 0.005 / lr_z 0.015; everything else gets the cifar10-scale
// values), then validates. Violations throw ConfigInvalid naming the
// offending key. DATA_DIR / RUN_DIR environment variables override the
// corresponding fields; nothing else is read from the environment.
ExperimentConfig resolve_config(const std::string& json_text);

ExperimentConfig resolve_config_file(const std::string& path);

// Total oracle allowance of a run: epochs * batch * steps_per_epoch.
int64_t query_budget(const TrainConfig& cfg);

// FNV-1a of the resolved config text, as fixed-width hex.
std::string config_hash(const std::string& resolved_json);

// Writes provenance.json: {git_commit, config_hash, seed, started_at}.
void write_provenance(const std::string& dir, const std::string& resolved_json, uint64_t seed);

} // namespace rsteal::harness
