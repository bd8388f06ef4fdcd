#pragma once

#include <functional>
#include <optional>
#include <string>

#include "rsteal/advtest.hpp"
#include "rsteal/datagen.hpp"
#include "rsteal/dataset.hpp"
#include "rsteal/membank.hpp"
#include "rsteal/nn/optim.hpp"
#include "rsteal/oracle.hpp"
#include "rsteal/samplecraft.hpp"

namespace rsteal {

// Query strategies: what gets sent to the oracle and what the clone fits.
//  kHee — unconstrained entropy-ascent probes, queried once
//  kUe  — ball-constrained KL-descent probes, queried once
//  kAe  — query clean views for pseudo-labels, craft PGD examples against
//         the clone, query those again (two oracle charges per batch)
//  kAt  — query clean views, then one PGD adversarial-training step
enum class Strategy { kHee, kUe, kAe, kAt };

Strategy strategy_from_string(const std::string& name); // ConfigInvalid
std::string strategy_to_string(Strategy s);

enum class AttackMode { kDataFree, kProxy };

struct TrainConfig {
    int epochs = 300;          // E
    int batch = 256;           // B
    int steps_per_epoch = 500; // N_C
    float lr0 = 0.1f;
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
    Strategy strategy = Strategy::kHee;
    AttackMode mode = AttackMode::kDataFree;
    std::string clone_arch = "resnet18";
    ProbeConfig probe;         // kHee / kUe probe settings
    SynthesisConfig synthesis; // kDataFree only
    float eps = 8.0f / 255.0f; // kAe / kAt inner PGD ball
    float eta = 2.0f / 255.0f;
    int at_steps = 7;
    int eval_every = 10;       // heldout eval + checkpoint cadence (epochs)
    int eval_samples = 1000;
    int eval_batch = 128;
    uint64_t seed = 0;

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

// Diagnostics hook for wiring tests: the intermediate batches of one step.
struct StepTrace {
    Tensor sampled{std::vector<int>{0}};
    Tensor augmented{std::vector<int>{0}};
    Tensor queried{std::vector<int>{0}}; // what the oracle actually saw
    Tensor fitted{std::vector<int>{0}};  // what the clone trained on
    HardLabelBatch labels;
};

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_ce = 0.0;
    std::optional<double> clean_acc; // only on eval epochs
    std::optional<double> pgd20_acc;
    int64_t queries_used = 0;
};

struct AttackResult {
    nn::ModelPtr clone;
    int epochs_completed = 0;
    int64_t queries_used = 0;
    bool budget_exhausted = false;
    double best_clean_acc = 0.0;
    std::vector<EpochMetrics> history;
    EvalReport final_report; // empty (n_samples 0) when no heldout given
};

// lr0 * (1 + cos(pi * epoch / total)) / 2
double cosine_lr(int epoch, int total_epochs, double lr0);

// One optimizer step: sample the bank, strong-augment, run the strategy's
// query path, fit the clone on (queried examples, oracle labels) with CE.
// Draw order on `rng`: bank sampling, then augmentation, then any probe or
// attack randomness. Returns the CE value. The clone's gradient path never
// touches the oracle's model — labels are the only thing that crosses.
double clone_step(nn::Model& clone, const MemoryBank& bank, HardLabelOracle& oracle,
                  const TrainConfig& cfg, nn::Sgd& opt, Rng& rng, StepTrace* trace = nullptr);

// Full loop: per epoch, synthesize one batch into the bank (data-free) and
// run steps_per_epoch clone steps under the cosine schedule. Writes
// config.json / ledger.json / metrics.csv / bank/ / ckpt_<e>.bin (plus
// ckpt_best.bin by heldout clean accuracy) into run_dir. BudgetExhausted
// mid-run checkpoints what exists and returns with budget_exhausted set.
// Proxy mode appends the proxy set to the bank once and never synthesizes.
AttackResult run_attack(HardLabelOracle& oracle, const TrainConfig& cfg,
                        const std::string& run_dir, const Dataset* heldout,
                        const Dataset* proxy, Rng& rng,
                        const std::function<void(const EpochMetrics&)>& on_epoch = nullptr);

} // namespace rsteal
