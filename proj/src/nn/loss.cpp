#include "rsteal/nn/loss.hpp"

#include <cmath>

#include "rsteal/errors.hpp"

namespace rsteal::nn {

namespace {

void check_logits(const Tensor& logits, const char* who) {
    if (logits.ndim() != 2)
        throw ShapeMismatch(std::string(who) + ": expected (N,K) logits, got " + logits.shape_str());
}

void check_value(double v, const char* who) {
    if (!std::isfinite(v)) throw NonFiniteLoss(std::string(who) + ": non-finite loss value");
}

// numerically stable row-wise log-softmax + softmax
void row_logsoftmax(const float* z, int k, float* logp, float* p) {
    float m = z[0];
    for (int j = 1; j < k; ++j) m = std::max(m, z[j]);
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::exp(static_cast<double>(z[j]) - m);
    const float logz = m + static_cast<float>(std::log(s));
    for (int j = 0; j < k; ++j) {
        logp[j] = z[j] - logz;
        p[j] = std::exp(logp[j]);
    }
}

} // namespace

double entropy_row(const float* p, int k) {
    double h = 0.0;
    for (int j = 0; j < k; ++j)
        if (p[j] > 0.0f) h -= static_cast<double>(p[j]) * std::log(static_cast<double>(p[j]));
    return h;
}

double kl_uniform_row(const float* p, int k) {
    double d = 0.0;
    for (int j = 0; j < k; ++j)
        if (p[j] > 0.0f)
            d += static_cast<double>(p[j]) * std::log(static_cast<double>(k) * p[j]);
    return d;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& dprobs) {
    if (!probs.same_shape(dprobs)) throw ShapeMismatch("softmax_backward: shape mismatch");
    const int n = probs.dim(0), k = probs.dim(1);
    Tensor dz({n, k});
    for (int i = 0; i < n; ++i) {
        const float* p = probs.data() + static_cast<int64_t>(i) * k;
        const float* g = dprobs.data() + static_cast<int64_t>(i) * k;
        double dot = 0.0;
        for (int j = 0; j < k; ++j) dot += static_cast<double>(p[j]) * g[j];
        float* out = dz.data() + static_cast<int64_t>(i) * k;
        for (int j = 0; j < k; ++j) out[j] = p[j] * (g[j] - static_cast<float>(dot));
    }
    return dz;
}

LossOut softmax_xent_hard(const Tensor& logits, const std::vector<int>& labels) {
    check_logits(logits, "softmax_xent_hard");
    const int n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw MissingLabels("softmax_xent_hard: " + std::to_string(labels.size()) +
                            " labels for batch of " + std::to_string(n));
    LossOut out;
    out.dlogits = Tensor({n, k});
    std::vector<float> logp(static_cast<size_t>(k)), p(static_cast<size_t>(k));
    double acc = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= k)
            throw MissingLabels("softmax_xent_hard: label " + std::to_string(y) + " outside [0," +
                                std::to_string(k) + ")");
        row_logsoftmax(logits.data() + static_cast<int64_t>(i) * k, k, logp.data(), p.data());
        acc -= logp[static_cast<size_t>(y)];
        float* d = out.dlogits.data() + static_cast<int64_t>(i) * k;
        for (int j = 0; j < k; ++j) d[j] = p[static_cast<size_t>(j)] * inv_n;
        d[y] -= inv_n;
    }
    out.value = acc / n;
    check_value(out.value, "softmax_xent_hard");
    return out;
}

LossOut softmax_xent_soft(const Tensor& logits, const Tensor& targets) {
    check_logits(logits, "softmax_xent_soft");
    if (!logits.same_shape(targets)) throw ShapeMismatch("softmax_xent_soft: target shape mismatch");
    const int n = logits.dim(0), k = logits.dim(1);
    LossOut out;
    out.dlogits = Tensor({n, k});
    std::vector<float> logp(static_cast<size_t>(k)), p(static_cast<size_t>(k));
    double acc = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        row_logsoftmax(logits.data() + static_cast<int64_t>(i) * k, k, logp.data(), p.data());
        const float* t = targets.data() + static_cast<int64_t>(i) * k;
        float* d = out.dlogits.data() + static_cast<int64_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            acc -= static_cast<double>(t[j]) * logp[static_cast<size_t>(j)];
            d[j] = (p[static_cast<size_t>(j)] - t[j]) * inv_n;
        }
    }
    out.value = acc / n;
    check_value(out.value, "softmax_xent_soft");
    return out;
}

LossOut entropy_objective(const Tensor& logits) {
    check_logits(logits, "entropy_objective");
    const int n = logits.dim(0), k = logits.dim(1);
    LossOut out;
    out.dlogits = Tensor({n, k});
    std::vector<float> logp(static_cast<size_t>(k)), p(static_cast<size_t>(k));
    double acc = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        row_logsoftmax(logits.data() + static_cast<int64_t>(i) * k, k, logp.data(), p.data());
        double h = 0.0;
        for (int j = 0; j < k; ++j) h -= static_cast<double>(p[static_cast<size_t>(j)]) * logp[static_cast<size_t>(j)];
        acc += h;
        float* d = out.dlogits.data() + static_cast<int64_t>(i) * k;
        for (int j = 0; j < k; ++j)
            d[j] = -p[static_cast<size_t>(j)] *
                   (logp[static_cast<size_t>(j)] + static_cast<float>(h)) * inv_n;
    }
    out.value = acc / n;
    check_value(out.value, "entropy_objective");
    return out;
}

LossOut kl_uniform_objective(const Tensor& logits) {
    check_logits(logits, "kl_uniform_objective");
    const int n = logits.dim(0), k = logits.dim(1);
    const float logk = std::log(static_cast<float>(k));
    const float u = 1.0f / static_cast<float>(k);
    LossOut out;
    out.dlogits = Tensor({n, k});
    std::vector<float> logp(static_cast<size_t>(k)), p(static_cast<size_t>(k));
    double acc = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        row_logsoftmax(logits.data() + static_cast<int64_t>(i) * k, k, logp.data(), p.data());
        // KL(u || p) = -lnK - (1/K) sum_j ln p_j. Unlike lnK - H(p), this
        // blows up whenever any class probability collapses, so descending
        // it keeps every class in play — the probe is pulled toward points
        // where all K classes stay plausible, not just the two nearest.
        double d_i = -logk;
        for (int j = 0; j < k; ++j)
            d_i -= static_cast<double>(u) * logp[static_cast<size_t>(j)];
        acc += d_i;
        float* d = out.dlogits.data() + static_cast<int64_t>(i) * k;
        for (int j = 0; j < k; ++j) d[j] = (p[static_cast<size_t>(j)] - u) * inv_n;
    }
    out.value = acc / n;
    check_value(out.value, "kl_uniform_objective");
    return out;
}

LossOut cw_attack_objective(const Tensor& logits, const std::vector<int>& labels, float kappa) {
    check_logits(logits, "cw_attack_objective");
    const int n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw MissingLabels("cw_attack_objective: label count mismatch");
    if (k < 2) throw ShapeMismatch("cw_attack_objective: needs at least 2 classes");
    LossOut out;
    out.dlogits = Tensor({n, k});
    double acc = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= k) throw MissingLabels("cw_attack_objective: label outside range");
        const float* z = logits.data() + static_cast<int64_t>(i) * k;
        int jstar = y == 0 ? 1 : 0;
        for (int j = 0; j < k; ++j)
            if (j != y && z[j] > z[jstar]) jstar = j;
        const float margin = z[jstar] - z[y];
        acc += std::min(margin, kappa);
        if (margin < kappa) {
            float* d = out.dlogits.data() + static_cast<int64_t>(i) * k;
            d[jstar] += inv_n;
            d[y] -= inv_n;
        }
    }
    out.value = acc / n;
    check_value(out.value, "cw_attack_objective");
    return out;
}

KlOut softmax_kl(const Tensor& logits_a, const Tensor& logits_b) {
    check_logits(logits_a, "softmax_kl");
    if (!logits_a.same_shape(logits_b)) throw ShapeMismatch("softmax_kl: shape mismatch");
    const int n = logits_a.dim(0), k = logits_a.dim(1);
    KlOut out;
    out.dlogits_a = Tensor({n, k});
    out.dlogits_b = Tensor({n, k});
    std::vector<float> lp(static_cast<size_t>(k)), p(static_cast<size_t>(k));
    std::vector<float> lq(static_cast<size_t>(k)), q(static_cast<size_t>(k));
    double acc = 0.0;
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        row_logsoftmax(logits_a.data() + static_cast<int64_t>(i) * k, k, lp.data(), p.data());
        row_logsoftmax(logits_b.data() + static_cast<int64_t>(i) * k, k, lq.data(), q.data());
        double kl = 0.0;
        for (int j = 0; j < k; ++j)
            kl += static_cast<double>(p[static_cast<size_t>(j)]) *
                  (lp[static_cast<size_t>(j)] - lq[static_cast<size_t>(j)]);
        acc += kl;
        float* da = out.dlogits_a.data() + static_cast<int64_t>(i) * k;
        float* db = out.dlogits_b.data() + static_cast<int64_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const size_t js = static_cast<size_t>(j);
            da[j] = p[js] * (lp[js] - lq[js] - static_cast<float>(kl)) * inv_n;
            db[j] = (q[js] - p[js]) * inv_n;
        }
    }
    out.value = acc / n;
    check_value(out.value, "softmax_kl");
    return out;
}

LossOut batch_mean_neg_entropy(const Tensor& logits) {
    check_logits(logits, "batch_mean_neg_entropy");
    const int n = logits.dim(0), k = logits.dim(1);
    LossOut out;
    out.dlogits = Tensor({n, k});
    Tensor probs({n, k});
    std::vector<float> lp(static_cast<size_t>(k));
    for (int i = 0; i < n; ++i)
        row_logsoftmax(logits.data() + static_cast<int64_t>(i) * k, k, lp.data(),
                       probs.data() + static_cast<int64_t>(i) * k);
    std::vector<double> pbar(static_cast<size_t>(k), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) pbar[static_cast<size_t>(j)] += probs.at2(i, j);
    for (auto& v : pbar) v /= n;
    double value = 0.0;
    std::vector<float> gbar(static_cast<size_t>(k)); // d value / d pbar_k over N
    for (int j = 0; j < k; ++j) {
        const double pb = std::max(pbar[static_cast<size_t>(j)], 1e-12);
        value += pb * std::log(pb);
        gbar[static_cast<size_t>(j)] = static_cast<float>((std::log(pb) + 1.0) / n);
    }
    for (int i = 0; i < n; ++i) {
        const float* p = probs.data() + static_cast<int64_t>(i) * k;
        double dot = 0.0;
        for (int j = 0; j < k; ++j)
            dot += static_cast<double>(p[j]) * gbar[static_cast<size_t>(j)];
        float* d = out.dlogits.data() + static_cast<int64_t>(i) * k;
        for (int j = 0; j < k; ++j)
            d[j] = p[j] * (gbar[static_cast<size_t>(j)] - static_cast<float>(dot));
    }
    out.value = value;
    check_value(out.value, "batch_mean_neg_entropy");
    return out;
}

} // namespace rsteal::nn
