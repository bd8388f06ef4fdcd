#pragma once

#include <vector>

#include "rsteal/tensor.hpp"

namespace rsteal::nn {

// Every loss returns its (double-accumulated) scalar value together with the
// gradient wrt the logits it was fed, already scaled for a batch mean.
struct LossOut {
    double value = 0.0;
    Tensor dlogits;
};

// row-wise Shannon entropy of a probability vector, in nats (double accumulation)
double entropy_row(const float* p, int k);
// row-wise KL(p || uniform) computed directly as sum_k p_k ln(K p_k), in nats
double kl_uniform_row(const float* p, int k);

// chain rule through a row-wise softmax: given p = softmax(z) and g = dL/dp,
// returns dL/dz with rows p .* (g - <p, g>)
Tensor softmax_backward(const Tensor& probs, const Tensor& dprobs);

// mean cross entropy against integer labels; dlogits = (p - onehot)/N
LossOut softmax_xent_hard(const Tensor& logits, const std::vector<int>& labels);

// mean cross entropy against soft targets whose rows sum to 1; dlogits = (p - t)/N
LossOut softmax_xent_soft(const Tensor& logits, const Tensor& targets);

// mean prediction entropy over the batch (ascend to craft high-entropy examples)
LossOut entropy_objective(const Tensor& logits);

// mean KL(uniform || softmax(z)) — the uniform-target probe objective.
// dlogits = (p - 1/K)/N, i.e. cross-entropy against a uniform soft target
// (the two differ by the constant ln K). Descending it pushes EVERY class
// probability up together, unlike descending ln K - H.
LossOut kl_uniform_objective(const Tensor& logits);

// margin objective in attack orientation: mean_i min(max_{j != y} z_j - z_y, kappa);
// ascending it pushes a wrong logit above the true one until the kappa margin
LossOut cw_attack_objective(const Tensor& logits, const std::vector<int>& labels,
                            float kappa = 0.0f);

// KL(softmax(a) || softmax(b)) with gradients wrt both logit sets
struct KlOut {
    double value = 0.0;
    Tensor dlogits_a;
    Tensor dlogits_b;
};
KlOut softmax_kl(const Tensor& logits_a, const Tensor& logits_b);

// negative entropy of the batch-mean class posterior (class-diversity term:
// descending it spreads predicted classes across the batch)
LossOut batch_mean_neg_entropy(const Tensor& logits);

} // namespace rsteal::nn
