#pragma once

#include <functional>
#include <string>

#include "rsteal/advtest.hpp"
#include "rsteal/dataset.hpp"
#include "rsteal/nn/models.hpp"
#include "rsteal/rng.hpp"

namespace rsteal {

enum class TrainScheme { kStandard, kPgdAt, kTrades };

TrainScheme scheme_from_string(const std::string& name); // ConfigInvalid on unknown
std::string scheme_to_string(TrainScheme scheme);

struct TargetRecipe {
    std::string arch = "smallcnn";
    std::string dataset = "cifar10";
    TrainScheme scheme = TrainScheme::kStandard;
    float trades_beta = 6.0f;     // kTrades only
    float eps = 8.0f / 255.0f;    // inner attack ball (kPgdAt / kTrades)
    float eta = 2.0f / 255.0f;    // inner attack step
    int attack_steps = 7;
    int epochs = 30;
    int batch = 128;
    float lr0 = 0.1f;
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
    uint64_t seed = 0;
    int eval_samples = 1000;      // test rows used for the closing report
    int eval_batch = 128;
};

struct TrainedTarget {
    nn::ModelPtr model;
    EvalReport report;
};

// Trains a victim under the recipe and closes with the standard attack
// battery on the test split. The three schemes share one loop: standard
// fits clean batches; pgd_at fits PGD examples of each batch; trades fits
// CE(clean) + beta * KL(adv || clean) with a KL-ascent inner loop. beta = 0
// short-circuits the inner loop entirely, so its trajectory reproduces the
// standard scheme draw-for-draw on a fixed seed. Non-finite training loss
// throws DivergedTraining.
TrainedTarget train_target(const TargetRecipe& recipe, const Dataset& train,
                           const Dataset& test,
                           const std::function<void(int, double)>& on_epoch = nullptr);

// Checkpoint + sidecar: <path> holds the weights, <path>.json records
// {architecture, recipe, eval}.
void save_target(const std::string& path, nn::Model& model, const TargetRecipe& recipe,
                 const EvalReport& report);
nn::ModelPtr load_target(const std::string& path);

} // namespace rsteal
