#include "rsteal/tensor_ops.hpp"

#include <cmath>

#include "rsteal/kern/kernels.hpp"

namespace rsteal {

void add_(Tensor& y, const Tensor& x) {
    if (!y.same_shape(x)) throw ShapeMismatch("add_: " + y.shape_str() + " vs " + x.shape_str());
    kern::K().add(y.data(), x.data(), static_cast<size_t>(y.numel()));
}

void axpy_(float a, const Tensor& x, Tensor& y) {
    if (!y.same_shape(x)) throw ShapeMismatch("axpy_: " + y.shape_str() + " vs " + x.shape_str());
    kern::K().axpy(a, x.data(), y.data(), static_cast<size_t>(y.numel()));
}

void scale_(float a, Tensor& y) { kern::K().scale(a, y.data(), static_cast<size_t>(y.numel())); }

void clamp_(Tensor& t, float lo, float hi) {
    kern::K().clamp(lo, hi, t.data(), static_cast<size_t>(t.numel()));
}

void clamp01_(Tensor& t) { clamp_(t, 0.0f, 1.0f); }

void fill_gaussian(Tensor& t, Rng& rng, float mean, float stddev) {
    for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = mean + stddev * static_cast<float>(rng.gaussian());
}

void fill_uniform(Tensor& t, Rng& rng, float lo, float hi) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
}

bool all_finite(const Tensor& t) {
    for (int64_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

Tensor softmax_rows(const Tensor& logits) {
    if (logits.ndim() != 2) throw ShapeMismatch("softmax_rows expects (N, K), got " + logits.shape_str());
    Tensor p(logits.shape());
    kern::K().softmax_rows(logits.data(), p.data(), logits.dim(0), logits.dim(1));
    return p;
}

std::vector<int> argmax_rows(const Tensor& scores) {
    if (scores.ndim() != 2) throw ShapeMismatch("argmax_rows expects (N, K)");
    const int n = scores.dim(0), k = scores.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const float* row = scores.data() + static_cast<int64_t>(i) * k;
        int best = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j; // strict: ties keep the lowest index
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

double mean(const Tensor& t) {
    double acc = 0.0;
    for (int64_t i = 0; i < t.numel(); ++i) acc += t[i];
    return t.numel() ? acc / static_cast<double>(t.numel()) : 0.0;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("max_abs_diff shape mismatch");
    float m = 0.0f;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace rsteal
