#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops behind the tensor/nn layers. Every entry point
// has a scalar reference implementation and (on x86-64) an AVX2+FMA variant;
// the active table is chosen once at startup from CPUID and can be pinned
// via RSTEAL_KERNELS=scalar|avx2 for the equivalence tests.
namespace rsteal::kern {

struct Kernels {
    // Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
    // op(A) is M x K (lda = row stride of the stored matrix), op(B) is K x N.
    void (*sgemm)(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                  const float* a, int lda, const float* b, int ldb, float beta,
                  float* c, int ldc);

    // y[i] += x[i]
    void (*add)(float* y, const float* x, size_t n);
    // y[i] += a * x[i]
    void (*axpy)(float a, const float* x, float* y, size_t n);
    // y[i] *= a
    void (*scale)(float a, float* y, size_t n);
    // y[i] *= x[i]
    void (*mul)(float* y, const float* x, size_t n);
    float (*dot)(const float* x, const float* y, size_t n);
    float (*sum)(const float* x, size_t n);
    float (*max)(const float* x, size_t n);

    void (*relu_fwd)(const float* x, float* y, size_t n);
    // gx[i] = x[i] > 0 ? gy[i] : 0  (accumulates into gx)
    void (*relu_bwd)(const float* x, const float* gy, float* gx, size_t n);
    void (*lrelu_fwd)(float slope, const float* x, float* y, size_t n);
    void (*lrelu_bwd)(float slope, const float* x, const float* gy, float* gx, size_t n);
    void (*sigmoid_fwd)(const float* x, float* y, size_t n);
    // gx[i] = gy[i] * y[i] * (1 - y[i]) with y the forward output (accumulates)
    void (*sigmoid_bwd)(const float* y, const float* gy, float* gx, size_t n);

    void (*clamp)(float lo, float hi, float* x, size_t n);
    // x[i] += a * sign(g[i]), sign(0) = 0
    void (*sign_step)(float a, const float* g, float* x, size_t n);
    // x = clamp(x, ref - eps, ref + eps), the l-inf ball projection
    void (*project_linf)(const float* ref, float eps, float* x, size_t n);

    // row-wise softmax over an n x k matrix (numerically shifted)
    void (*softmax_rows)(const float* z, float* p, int n, int k);

    const char* name;
};

const Kernels& K();

enum class Backend { kAuto, kScalar, kAvx2 };

// Returns false if the requested backend is unsupported on this CPU.
bool set_backend(Backend b);
const char* active_backend();
bool avx2_supported();

namespace detail {
extern const Kernels scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const Kernels avx2_table;
#endif
} // namespace detail

} // namespace rsteal::kern
