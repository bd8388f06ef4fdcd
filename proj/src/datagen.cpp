#include "rsteal/datagen.hpp"

#include <cmath>

#include "rsteal/augment.hpp"
#include "rsteal/errors.hpp"
#include "rsteal/nn/loss.hpp"
#include "rsteal/nn/optim.hpp"
#include "rsteal/samplecraft.hpp"
#include "rsteal/tensor_ops.hpp"

namespace rsteal {

Tensor smooth_labels(const std::vector<int>& y, int num_classes, float s) {
    if (!(s >= 0.0f && s < 1.0f))
        throw InvalidFactor("smoothing factor must lie in [0,1), got " + std::to_string(s));
    if (num_classes < 2) throw InvalidFactor("label smoothing needs >= 2 classes");
    Tensor t({static_cast<int>(y.size()), num_classes});
    const float off = s / static_cast<float>(num_classes);
    for (size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] >= num_classes)
            throw MissingLabels("label out of range: " + std::to_string(y[i]));
        for (int j = 0; j < num_classes; ++j)
            t.at2(static_cast<int64_t>(i), j) = off + (j == y[i] ? 1.0f - s : 0.0f);
    }
    return t;
}

double class_diversity_loss(const Tensor& clone_probs) {
    // prediction_entropy validates the rows; reuse it for the check.
    (void)prediction_entropy(clone_probs);
    const int64_t n = clone_probs.shape()[0], k = clone_probs.shape()[1];
    double value = 0.0;
    for (int64_t j = 0; j < k; ++j) {
        double mean = 0.0;
        for (int64_t i = 0; i < n; ++i) mean += clone_probs.at2(i, j);
        mean /= static_cast<double>(n);
        if (mean > 0.0) value += mean * std::log(mean);
    }
    return value;
}

double surrogate_cls_loss(const Tensor& clone_logits, const Tensor& smoothed_targets) {
    return nn::softmax_xent_soft(clone_logits, smoothed_targets).value;
}

GeneratorState init_generator_state(const SynthesisConfig& cfg, Rng& rng) {
    GeneratorState state;
    state.latent_dim = cfg.latent_dim;
    state.generator = nn::make_generator(cfg.latent_dim, rng, cfg.base_channels);
    return state;
}

Tensor generate_substitute_batch(GeneratorState& state, nn::Model& clone,
                                 const SynthesisConfig& cfg, Rng& rng,
                                 std::vector<double>* loss_trace) {
    if (cfg.batch <= 0) throw ConfigInvalid("synthesis batch must be positive");
    if (cfg.gen_iters < 0) throw ConfigInvalid("gen_iters must be >= 0");
    if (cfg.lambda_div < 0.0f) throw ConfigInvalid("diversity weight must be >= 0");
    if (state.generator == nullptr || state.generator->empty())
        throw ConfigInvalid("generator state not initialized");
    if (cfg.full_reinit) {
        Rng init_rng = rng.fork("gen_reinit");
        state.generator = nn::make_generator(state.latent_dim, init_rng, cfg.base_channels);
    }
    nn::Model& gen = *state.generator;

    // Latent codes live in a Param so the Adam step treats them exactly like
    // weights; they are discarded when this call returns.
    nn::Param z{Tensor({cfg.batch, state.latent_dim}), Tensor({cfg.batch, state.latent_dim}), "z"};
    fill_gaussian(z.value, rng);
    std::vector<int> pseudo(static_cast<size_t>(cfg.batch));
    for (auto& label : pseudo) label = static_cast<int>(rng.uniform_index(cfg.classes));
    const Tensor targets = smooth_labels(pseudo, cfg.classes, cfg.smooth);

    nn::Adam opt_gen(gen.params(), cfg.lr_gen);
    nn::Adam opt_z({&z}, cfg.lr_z);

    for (int it = 0; it < cfg.gen_iters; ++it) {
        Tensor imgs = gen.forward(z.value, /*train=*/true);
        StandardAugment aug;
        Tensor views = aug.apply(imgs, rng);
        Tensor logits = clone.forward(views, /*train=*/false);

        nn::LossOut cls = nn::softmax_xent_soft(logits, targets);
        nn::LossOut div = nn::batch_mean_neg_entropy(logits);
        const double loss = cls.value + cfg.lambda_div * div.value;
        if (!std::isfinite(loss)) throw NonFiniteLoss("synthesis loss is non-finite");
        if (loss_trace) loss_trace->push_back(loss);

        Tensor dlogits = cls.dlogits;
        axpy_(static_cast<float>(cfg.lambda_div), div.dlogits, dlogits);
        Tensor gviews = clone.backward_input(dlogits); // frozen clone: input grads only
        Tensor gimgs = aug.backward(gviews);
        gen.zero_grads();
        z.grad.fill(0.0f);
        Tensor gz = gen.backward(gimgs);
        add_(z.grad, gz);
        opt_gen.step();
        opt_z.step();
    }

    Tensor batch = gen.forward(z.value, /*train=*/true);
    clamp01_(batch); // sigmoid output; exact endpoints after float rounding
    ++state.epoch_index;
    return batch;
}

} // namespace rsteal
