#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rsteal/nn/loss.hpp"
#include "rsteal/nn/models.hpp"
#include "rsteal/rng.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

enum class ProbeObjective { kEntropyMax, kKlUniformMin, kCeMax };

struct ProbeConfig {
    ProbeObjective objective = ProbeObjective::kEntropyMax;
    bool constrained = false; // project each iterate onto the eps-ball
    float eps = 8.0f / 255.0f;
    float alpha = 0.03f;
    int steps = 10;
    bool random_start = false;
    bool clip01 = true; // image domain; the 2D toy domain turns this off
    bool record_snapshots = false;
};

struct ProbeTrace {
    Tensor final_batch{std::vector<int>{0}};
    // Batch-mean objective at every iterate: entry 0 is the starting point,
    // entry t the iterate after step t (steps+1 entries total). For
    // kl_uniform_min the recorded value is the KL itself (the descended
    // quantity), so the trace is expected to fall.
    std::vector<double> objective_trace;
    std::vector<Tensor> snapshots; // filled only when record_snapshots
};

// Per-row Shannon entropy / KL divergence to the uniform distribution of a
// batch of probability rows. Rows must sum to 1 within 1e-6 and be
// non-negative, else InvalidDistribution.
std::vector<double> prediction_entropy(const Tensor& probs);
std::vector<double> kl_to_uniform(const Tensor& probs);

// Low-level iterated sign-step engine behind both probe construction and the
// evaluation attacks. `objective` maps logits to a LossOut whose `value` is
// recorded in the trace verbatim and whose `dlogits` points in the ASCENT
// direction (callers encode descent by negating the gradient, not the
// value). Each coordinate moves by exactly +-alpha or 0 per step; iterates
// are projected onto the eps-ball of the input after every step iff
// `constrained`, and clipped to [0,1] (per step when constrained, once at
// the end otherwise) iff `clip01`. Gradients flow through the model in eval
// mode with parameter gradients skipped; a non-finite gradient throws
// NonFiniteGradient.
ProbeTrace signed_gradient_ascent(
    nn::Model& model, const Tensor& x,
    const std::function<nn::LossOut(const Tensor& logits)>& objective,
    const ProbeConfig& cfg, Rng* rng = nullptr);

// Crafts probe batches for the query strategies. `y` is required iff the
// objective is ce_max (MissingLabels otherwise); `rng` is required iff
// random_start is set.
ProbeTrace construct_probe(nn::Model& model, const Tensor& x, const ProbeConfig& cfg,
                           const std::vector<int>* y = nullptr, Rng* rng = nullptr);

// Named configurations: "HEE", "UE", "AE_PGD", "HEE_no_entropy", "HEE_linf".
// Unknown names throw UnknownPreset.
ProbeConfig probe_preset(const std::string& name);

} // namespace rsteal
