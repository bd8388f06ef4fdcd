#include "rsteal/kern/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

// Reference kernels. Plain loops, no platform assumptions; the AVX2 table is
// equivalence-tested against these.
namespace rsteal::kern {
namespace {

inline const float* row_ptr(const float* m, int ld, int r) { return m + static_cast<ptrdiff_t>(r) * ld; }

// a_ik: element (i, k) of op(A) where the stored matrix has leading dim lda
inline float elem(const float* a, int lda, bool trans, int i, int k) {
    return trans ? a[static_cast<ptrdiff_t>(k) * lda + i] : a[static_cast<ptrdiff_t>(i) * lda + k];
}

void sgemm_scalar(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                  const float* a, int lda, const float* b, int ldb, float beta,
                  float* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<ptrdiff_t>(i) * ldc;
        if (beta == 0.0f)
            std::memset(crow, 0, sizeof(float) * static_cast<size_t>(n));
        else if (beta != 1.0f)
            for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    if (alpha == 0.0f || k == 0) return;

    if (!trans_a && !trans_b) {
        // i-k-j with a row of B streamed per k keeps this cache-friendly
        for (int i = 0; i < m; ++i) {
            float* crow = c + static_cast<ptrdiff_t>(i) * ldc;
            const float* arow = row_ptr(a, lda, i);
            for (int p = 0; p < k; ++p) {
                const float av = alpha * arow[p];
                if (av == 0.0f) continue;
                const float* brow = row_ptr(b, ldb, p);
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
        return;
    }
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<ptrdiff_t>(i) * ldc;
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int p = 0; p < k; ++p)
                acc += elem(a, lda, trans_a, i, p) * elem(b, ldb, trans_b, p, j);
            crow[j] += alpha * acc;
        }
    }
}

void add_scalar(float* y, const float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += x[i];
}

void axpy_scalar(float a, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(float a, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] *= a;
}

void mul_scalar(float* y, const float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] *= x[i];
}

float dot_scalar(const float* x, const float* y, size_t n) {
    float acc = 0.0f;
    for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

float sum_scalar(const float* x, size_t n) {
    float acc = 0.0f;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

float max_scalar(const float* x, size_t n) {
    float m = x[0];
    for (size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

void relu_fwd_scalar(const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_scalar(const float* x, const float* gy, float* gx, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (x[i] > 0.0f) gx[i] += gy[i];
}

void lrelu_fwd_scalar(float slope, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void lrelu_bwd_scalar(float slope, const float* x, const float* gy, float* gx, size_t n) {
    for (size_t i = 0; i < n; ++i) gx[i] += x[i] > 0.0f ? gy[i] : slope * gy[i];
}

void sigmoid_fwd_scalar(const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = 1.0f / (1.0f + std::exp(-x[i]));
}

void sigmoid_bwd_scalar(const float* y, const float* gy, float* gx, size_t n) {
    for (size_t i = 0; i < n; ++i) gx[i] += gy[i] * y[i] * (1.0f - y[i]);
}

void clamp_scalar(float lo, float hi, float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] = std::min(hi, std::max(lo, x[i]));
}

void sign_step_scalar(float a, const float* g, float* x, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        const float s = g[i] > 0.0f ? 1.0f : (g[i] < 0.0f ? -1.0f : 0.0f);
        x[i] += a * s;
    }
}

void project_linf_scalar(const float* ref, float eps, float* x, size_t n) {
    for (size_t i = 0; i < n; ++i)
        x[i] = std::min(ref[i] + eps, std::max(ref[i] - eps, x[i]));
}

void softmax_rows_scalar(const float* z, float* p, int n, int k) {
    for (int i = 0; i < n; ++i) {
        const float* zr = z + static_cast<ptrdiff_t>(i) * k;
        float* pr = p + static_cast<ptrdiff_t>(i) * k;
        float m = zr[0];
        for (int j = 1; j < k; ++j) m = std::max(m, zr[j]);
        float denom = 0.0f;
        for (int j = 0; j < k; ++j) {
            pr[j] = std::exp(zr[j] - m);
            denom += pr[j];
        }
        const float inv = 1.0f / denom;
        for (int j = 0; j < k; ++j) pr[j] *= inv;
    }
}

} // namespace

namespace detail {
const Kernels scalar_table = {
    sgemm_scalar, add_scalar,       axpy_scalar,        scale_scalar,
    mul_scalar,   dot_scalar,       sum_scalar,         max_scalar,
    relu_fwd_scalar, relu_bwd_scalar, lrelu_fwd_scalar, lrelu_bwd_scalar,
    sigmoid_fwd_scalar, sigmoid_bwd_scalar, clamp_scalar, sign_step_scalar,
    project_linf_scalar, softmax_rows_scalar, "scalar",
};
} // namespace detail

} // namespace rsteal::kern
