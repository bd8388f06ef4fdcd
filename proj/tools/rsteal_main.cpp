#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "rsteal/errors.hpp"
#include "rsteal/harness/config.hpp"
#include "rsteal/harness/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"data-free hard-label robustness stealing toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    bool dry_run = false;
    auto* train_cmd = app.add_subcommand("train-target", "train a victim model");
    train_cmd->add_option("--config", config_path, "experiment config JSON")->required();

    auto* attack_cmd = app.add_subcommand("attack", "run the model-stealing loop");
    attack_cmd->add_option("--config", config_path, "experiment config JSON")->required();
    attack_cmd->add_flag("--dry-run", dry_run,
                         "print the resolved config and query budget, then exit");

    std::string model_path, dataset = "synth10", data_dir = "data";
    int64_t samples = 1000;
    uint64_t seed = 0;
    auto* eval_cmd = app.add_subcommand("eval", "clean + robust accuracy of a checkpoint");
    eval_cmd->add_option("--model", model_path, "model checkpoint")->required();
    eval_cmd->add_option("--dataset", dataset, "dataset id");
    eval_cmd->add_option("--data-dir", data_dir, "archive directory");
    eval_cmd->add_option("--samples", samples, "evaluation sample cap");
    eval_cmd->add_option("--seed", seed, "rng seed");

    std::string surrogate_path, target_path;
    std::vector<double> eps_grid{4.0 / 255.0, 8.0 / 255.0, 12.0 / 255.0};
    auto* transfer_cmd = app.add_subcommand("transfer", "surrogate-to-target attack transfer");
    transfer_cmd->add_option("--surrogate", surrogate_path, "surrogate checkpoint")->required();
    transfer_cmd->add_option("--target", target_path, "target checkpoint")->required();
    transfer_cmd->add_option("--dataset", dataset, "dataset id");
    transfer_cmd->add_option("--data-dir", data_dir, "archive directory");
    transfer_cmd->add_option("--samples", samples, "evaluation sample cap");
    transfer_cmd->add_option("--eps-grid", eps_grid, "perturbation radii");
    transfer_cmd->add_option("--seed", seed, "rng seed");

    std::string method = "both", out_dir = "toy_out";
    int steps = 10, points_per_class = 100;
    bool render = false;
    auto* toy_cmd = app.add_subcommand("toy-boundary", "2D probe-trajectory figure data");
    toy_cmd->add_option("--method", method, "ue, hee, or both");
    toy_cmd->add_option("--steps", steps, "probe steps");
    toy_cmd->add_option("--seed", seed, "rng seed");
    toy_cmd->add_option("--out", out_dir, "output directory")->required();
    toy_cmd->add_flag("--render", render, "also write PNG previews");
    toy_cmd->add_option("--points-per-class", points_per_class, "dataset size knob");

    std::string which = "query-comparison", scale = "toy", runs_dir = "runs", out_csv;
    auto* table_cmd = app.add_subcommand("table", "aggregate run reports into a CSV");
    table_cmd->add_option("--which", which, "table id (query-comparison)");
    table_cmd->add_option("--scale", scale, "value for the scale column");
    table_cmd->add_option("--runs", runs_dir, "directory holding per-strategy runs");
    table_cmd->add_option("--out", out_csv, "CSV destination (optional)");

    CLI11_PARSE(app, argc, argv);

    try {
        using namespace rsteal::harness;
        if (train_cmd->parsed()) return cmd_train_target(resolve_config_file(config_path));
        if (attack_cmd->parsed()) return cmd_attack(resolve_config_file(config_path), dry_run);
        if (eval_cmd->parsed()) return cmd_eval(model_path, dataset, data_dir, samples, seed);
        if (transfer_cmd->parsed())
            return cmd_transfer(surrogate_path, target_path, dataset, data_dir, samples, eps_grid,
                                seed);
        if (toy_cmd->parsed())
            return cmd_toy_boundary(method, steps, seed, out_dir, render, points_per_class);
        if (table_cmd->parsed()) return cmd_table(which, scale, runs_dir, out_csv);
    } catch (const rsteal::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 2;
    }
    return 0;
}
