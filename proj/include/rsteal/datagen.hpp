#pragma once

#include <vector>

#include "rsteal/nn/models.hpp"
#include "rsteal/rng.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

// Generator weights survive across epochs (warm start); latent codes and
// optimizer moments are redrawn/rebuilt every call. epoch_index counts
// completed synthesis calls.
struct GeneratorState {
    nn::ModelPtr generator;
    int latent_dim = 256;
    int epoch_index = 0;
};

struct SynthesisConfig {
    int batch = 256;
    int classes = 10;
    int latent_dim = 256;
    int gen_iters = 10;        // joint (z, generator) update count per epoch
    float lr_gen = 0.002f;     // Adam step size on generator weights
    float lr_z = 0.01f;        // Adam step size on latent codes
    float lambda_div = 3.0f;   // weight of the class-diversity term
    float smooth = 0.2f;       // label smoothing factor
    int base_channels = 128;   // generator width knob for desk-scale runs
    bool full_reinit = false;  // re-initialize generator weights every epoch
};

// Smoothed one-hot rows: (1-s) on the drawn class plus s/K everywhere.
// s must lie in [0,1) (InvalidFactor).
Tensor smooth_labels(const std::vector<int>& y, int num_classes, float s);

// Batch-diversity term: with mean predicted distribution a_bar over the
// batch, returns sum_j a_bar_j ln a_bar_j — the negative entropy of the
// mean, in [-ln K, 0], minimized when predictions cover classes evenly.
// Rows must be simplex rows (InvalidDistribution).
double class_diversity_loss(const Tensor& clone_probs);

// Soft-label cross-entropy of clone logits against smoothed targets
// (batch mean), the classification half of the synthesis objective.
double surrogate_cls_loss(const Tensor& clone_logits, const Tensor& smoothed_targets);

GeneratorState init_generator_state(const SynthesisConfig& cfg, Rng& rng);

// One synthesis epoch: draws z ~ N(0,1)^{B x d} and uniform pseudo-classes,
// then runs gen_iters joint Adam updates on (z, generator weights) against
// the frozen clone — soft CE on standard-augmented generator output plus
// lambda_div times the diversity term. Returns the final batch (generator
// ends in a sigmoid, so values are already in [0,1]) and leaves the updated
// weights in `state`. gen_iters=0 returns the raw warm-started output for
// the drawn z. Consumes zero oracle queries; clone parameter gradients are
// never touched. Throws NonFiniteLoss if the objective leaves the reals.
Tensor generate_substitute_batch(GeneratorState& state, nn::Model& clone,
                                 const SynthesisConfig& cfg, Rng& rng,
                                 std::vector<double>* loss_trace = nullptr);

} // namespace rsteal
