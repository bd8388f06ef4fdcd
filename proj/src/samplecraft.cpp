#include "rsteal/samplecraft.hpp"

#include <cmath>

#include "rsteal/errors.hpp"
#include "rsteal/kern/kernels.hpp"
#include "rsteal/tensor_ops.hpp"

namespace rsteal {

namespace {

void check_simplex(const Tensor& probs) {
    if (probs.ndim() != 2)
        throw InvalidDistribution("expected N x K probability rows, got " + probs.shape_str());
    const int64_t n = probs.shape()[0], k = probs.shape()[1];
    for (int64_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int64_t j = 0; j < k; ++j) {
            const float p = probs.at2(i, j);
            if (!(p >= 0.0f)) throw InvalidDistribution("negative probability in row " + std::to_string(i));
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw InvalidDistribution("row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
}

} // namespace

std::vector<double> prediction_entropy(const Tensor& probs) {
    check_simplex(probs);
    const int64_t n = probs.shape()[0], k = probs.shape()[1];
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        double h = 0.0;
        for (int64_t j = 0; j < k; ++j) {
            const double p = probs.at2(i, j);
            if (p > 0.0) h -= p * std::log(p);
        }
        out[static_cast<size_t>(i)] = h;
    }
    return out;
}

std::vector<double> kl_to_uniform(const Tensor& probs) {
    check_simplex(probs);
    const int64_t n = probs.shape()[0], k = probs.shape()[1];
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        // Direct sum p*ln(K*p) rather than lnK - H, so the identity
        // KL + H = lnK stays a genuine cross-check between two formulas.
        double kl = 0.0;
        for (int64_t j = 0; j < k; ++j) {
            const double p = probs.at2(i, j);
            if (p > 0.0) kl += p * std::log(static_cast<double>(k) * p);
        }
        out[static_cast<size_t>(i)] = kl;
    }
    return out;
}

ProbeTrace signed_gradient_ascent(
    nn::Model& model, const Tensor& x,
    const std::function<nn::LossOut(const Tensor& logits)>& objective,
    const ProbeConfig& cfg, Rng* rng) {
    if (cfg.steps < 0) throw ConfigInvalid("probe steps must be >= 0");
    if (cfg.random_start && rng == nullptr)
        throw ConfigInvalid("random_start needs an rng");

    const Tensor& origin = x;
    Tensor cur = x;
    if (cfg.random_start && cfg.constrained) {
        for (int64_t i = 0; i < cur.numel(); ++i)
            cur.data()[i] += static_cast<float>(rng->uniform(-cfg.eps, cfg.eps));
        if (cfg.clip01) clamp01_(cur);
    }

    ProbeTrace trace;
    trace.objective_trace.reserve(static_cast<size_t>(cfg.steps) + 1);
    auto measure = [&](const Tensor& batch) {
        Tensor logits = model.forward(batch, /*train=*/false);
        nn::LossOut out = objective(logits);
        trace.objective_trace.push_back(out.value);
        return out;
    };

    for (int t = 0; t < cfg.steps; ++t) {
        if (cfg.record_snapshots) trace.snapshots.push_back(cur);
        nn::LossOut obj = measure(cur);
        Tensor grad = model.backward_input(obj.dlogits);
        if (!all_finite(grad)) throw NonFiniteGradient("probe gradient is non-finite at step " +
                                                       std::to_string(t));
        kern::K().sign_step(cfg.alpha, grad.data(), cur.data(), static_cast<size_t>(cur.numel()));
        if (cfg.constrained) {
            kern::K().project_linf(origin.data(), cfg.eps, cur.data(), static_cast<size_t>(cur.numel()));
            if (cfg.clip01) clamp01_(cur);
        }
    }
    if (cfg.clip01 && !cfg.constrained) clamp01_(cur);
    measure(cur); // objective of the batch actually returned
    if (cfg.record_snapshots) trace.snapshots.push_back(cur);
    trace.final_batch = std::move(cur);
    return trace;
}

ProbeTrace construct_probe(nn::Model& model, const Tensor& x, const ProbeConfig& cfg,
                           const std::vector<int>* y, Rng* rng) {
    std::function<nn::LossOut(const Tensor&)> objective;
    switch (cfg.objective) {
        case ProbeObjective::kEntropyMax:
            objective = [](const Tensor& logits) { return nn::entropy_objective(logits); };
            break;
        case ProbeObjective::kKlUniformMin:
            // Record the KL value but ascend its negation (= descend KL).
            objective = [](const Tensor& logits) {
                nn::LossOut kl = nn::kl_uniform_objective(logits);
                for (int64_t i = 0; i < kl.dlogits.numel(); ++i) kl.dlogits.data()[i] = -kl.dlogits.data()[i];
                return kl;
            };
            break;
        case ProbeObjective::kCeMax:
            if (y == nullptr)
                throw MissingLabels("ce_max objective needs labels");
            if (static_cast<int64_t>(y->size()) != x.shape()[0])
                throw MissingLabels("label count does not match batch");
            objective = [y](const Tensor& logits) { return nn::softmax_xent_hard(logits, *y); };
            break;
    }
    return signed_gradient_ascent(model, x, objective, cfg, rng);
}

ProbeConfig probe_preset(const std::string& name) {
    ProbeConfig cfg;
    if (name == "HEE") {
        cfg.objective = ProbeObjective::kEntropyMax;
        cfg.constrained = false;
        cfg.alpha = 0.03f;
        cfg.steps = 10;
        cfg.random_start = false;
        return cfg;
    }
    if (name == "UE") {
        cfg.objective = ProbeObjective::kKlUniformMin;
        cfg.constrained = true;
        cfg.eps = 8.0f / 255.0f;
        cfg.alpha = 2.0f / 255.0f;
        cfg.steps = 10;
        cfg.random_start = true;
        return cfg;
    }
    if (name == "AE_PGD") {
        cfg.objective = ProbeObjective::kCeMax;
        cfg.constrained = true;
        cfg.eps = 8.0f / 255.0f;
        cfg.alpha = 2.0f / 255.0f;
        cfg.steps = 10;
        cfg.random_start = true;
        return cfg;
    }
    if (name == "HEE_no_entropy") {
        // Ablation: keep the unconstrained high-step schedule but descend KL
        // to uniform instead of ascending entropy.
        cfg.objective = ProbeObjective::kKlUniformMin;
        cfg.constrained = false;
        cfg.alpha = 0.03f;
        cfg.steps = 10;
        cfg.random_start = false;
        return cfg;
    }
    if (name == "HEE_linf") {
        // Ablation: entropy ascent under the usual evaluation ball.
        cfg.objective = ProbeObjective::kEntropyMax;
        cfg.constrained = true;
        cfg.eps = 8.0f / 255.0f;
        cfg.alpha = 0.03f;
        cfg.steps = 10;
        cfg.random_start = false;
        return cfg;
    }
    throw UnknownPreset("unknown probe preset: " + name);
}

} // namespace rsteal
