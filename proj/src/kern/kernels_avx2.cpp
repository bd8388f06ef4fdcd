#if defined(__x86_64__) || defined(_M_X64)

#include "rsteal/kern/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

// AVX2+FMA kernel table. This translation unit is the only one compiled with
// -mavx2 -mfma; it is reached solely through the dispatch table after a CPUID
// check. exp-based entries reuse the scalar code (a polynomial exp would make
// the two backends disagree for no win; neither is a hot loop here).
namespace rsteal::kern {
namespace {

constexpr int MR = 6;   // microkernel rows
constexpr int NR = 16;  // microkernel cols (two ymm)
constexpr int KC = 256; // k blocking
constexpr int MC = 96;  // m blocking (multiple of MR)
constexpr int NC = 1024; // n blocking (multiple of NR)

inline float opm(const float* a, int lda, bool trans, int i, int k) {
    return trans ? a[static_cast<ptrdiff_t>(k) * lda + i] : a[static_cast<ptrdiff_t>(i) * lda + k];
}

// pack op(A)[i0:i0+mc, k0:k0+kc] into MR-row micro-panels, zero padded
void pack_a(const float* a, int lda, bool trans, int i0, int k0, int mc, int kc, float* dst) {
    for (int ib = 0; ib < mc; ib += MR) {
        const int rows = std::min(MR, mc - ib);
        for (int k = 0; k < kc; ++k) {
            for (int r = 0; r < MR; ++r)
                dst[r] = r < rows ? opm(a, lda, trans, i0 + ib + r, k0 + k) : 0.0f;
            dst += MR;
        }
    }
}

// pack op(B)[k0:k0+kc, j0:j0+nc] into NR-col micro-panels, zero padded
void pack_b(const float* b, int ldb, bool trans, int k0, int j0, int kc, int nc, float* dst) {
    for (int jb = 0; jb < nc; jb += NR) {
        const int cols = std::min(NR, nc - jb);
        if (!trans && cols == NR) {
            for (int k = 0; k < kc; ++k) {
                std::memcpy(dst, b + static_cast<ptrdiff_t>(k0 + k) * ldb + j0 + jb,
                            NR * sizeof(float));
                dst += NR;
            }
        } else {
            for (int k = 0; k < kc; ++k) {
                for (int c = 0; c < NR; ++c)
                    dst[c] = c < cols ? opm(b, ldb, trans, k0 + k, j0 + jb + c) : 0.0f;
                dst += NR;
            }
        }
    }
}

// C[mr x nr] += alpha * Apanel * Bpanel, panels padded to MR x kc and kc x NR
void micro_6x16(int kc, const float* ap, const float* bp, float alpha, float* c, int ldc,
                int mr, int nr) {
    __m256 acc[MR][2];
    for (auto& row : acc) {
        row[0] = _mm256_setzero_ps();
        row[1] = _mm256_setzero_ps();
    }
    for (int k = 0; k < kc; ++k) {
        const __m256 b0 = _mm256_loadu_ps(bp);
        const __m256 b1 = _mm256_loadu_ps(bp + 8);
        bp += NR;
        for (int r = 0; r < MR; ++r) {
            const __m256 av = _mm256_broadcast_ss(ap + r);
            acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
        }
        ap += MR;
    }
    const __m256 va = _mm256_set1_ps(alpha);
    if (mr == MR && nr == NR) {
        for (int r = 0; r < MR; ++r) {
            float* crow = c + static_cast<ptrdiff_t>(r) * ldc;
            _mm256_storeu_ps(crow, _mm256_fmadd_ps(va, acc[r][0], _mm256_loadu_ps(crow)));
            _mm256_storeu_ps(crow + 8, _mm256_fmadd_ps(va, acc[r][1], _mm256_loadu_ps(crow + 8)));
        }
        return;
    }
    alignas(32) float buf[MR * NR];
    for (int r = 0; r < MR; ++r) {
        _mm256_store_ps(buf + r * NR, acc[r][0]);
        _mm256_store_ps(buf + r * NR + 8, acc[r][1]);
    }
    for (int r = 0; r < mr; ++r) {
        float* crow = c + static_cast<ptrdiff_t>(r) * ldc;
        for (int j = 0; j < nr; ++j) crow[j] += alpha * buf[r * NR + j];
    }
}

void sgemm_avx2(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<ptrdiff_t>(i) * ldc;
        if (beta == 0.0f)
            std::memset(crow, 0, sizeof(float) * static_cast<size_t>(n));
        else if (beta != 1.0f)
            for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    if (alpha == 0.0f || k == 0 || m == 0 || n == 0) return;

    thread_local std::vector<float> apack, bpack;
    apack.resize(static_cast<size_t>(MC) * KC);
    bpack.resize(static_cast<size_t>(KC) * NC);

    for (int j0 = 0; j0 < n; j0 += NC) {
        const int nc = std::min(NC, n - j0);
        const int nc_pad = (nc + NR - 1) / NR * NR;
        for (int k0 = 0; k0 < k; k0 += KC) {
            const int kc = std::min(KC, k - k0);
            pack_b(b, ldb, trans_b, k0, j0, kc, nc, bpack.data());
            for (int i0 = 0; i0 < m; i0 += MC) {
                const int mc = std::min(MC, m - i0);
                pack_a(a, lda, trans_a, i0, k0, mc, kc, apack.data());
                for (int jb = 0; jb < nc; jb += NR) {
                    const float* bp = bpack.data() + static_cast<ptrdiff_t>(jb) * kc;
                    const int nr = std::min(NR, nc - jb);
                    for (int ib = 0; ib < mc; ib += MR) {
                        const float* ap = apack.data() + static_cast<ptrdiff_t>(ib) * kc;
                        const int mr = std::min(MR, mc - ib);
                        micro_6x16(kc, ap, bp, alpha,
                                   c + static_cast<ptrdiff_t>(i0 + ib) * ldc + j0 + jb, ldc, mr,
                                   nr);
                    }
                }
            }
        }
        (void)nc_pad;
    }
}

void add_avx2(float* y, const float* x, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void axpy_avx2(float a, const float* x, float* y, size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(float a, float* y, size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(va, _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] *= a;
}

void mul_avx2(float* y, const float* x, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] *= x[i];
}

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

float dot_avx2(const float* x, const float* y, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
    float r = hsum(acc);
    for (; i < n; ++i) r += x[i] * y[i];
    return r;
}

float sum_avx2(const float* x, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

float max_avx2(const float* x, size_t n) {
    float m = x[0];
    size_t i = 0;
    if (n >= 8) {
        __m256 vm = _mm256_loadu_ps(x);
        for (i = 8; i + 8 <= n; i += 8) vm = _mm256_max_ps(vm, _mm256_loadu_ps(x + i));
        alignas(32) float buf[8];
        _mm256_store_ps(buf, vm);
        for (const float v : buf) m = std::max(m, v);
    }
    for (; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

void relu_fwd_avx2(const float* x, float* y, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_avx2(const float* x, const float* gy, float* gx, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        const __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(gy + i));
        _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0f) gx[i] += gy[i];
}

void lrelu_fwd_avx2(float slope, const float* x, float* y, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 vs = _mm256_set1_ps(slope);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 mask = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
        _mm256_storeu_ps(y + i, _mm256_blendv_ps(_mm256_mul_ps(vs, v), v, mask));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void lrelu_bwd_avx2(float slope, const float* x, const float* gy, float* gx, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 vs = _mm256_set1_ps(slope);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        const __m256 g = _mm256_loadu_ps(gy + i);
        const __m256 dg = _mm256_blendv_ps(_mm256_mul_ps(vs, g), g, mask);
        _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), dg));
    }
    for (; i < n; ++i) gx[i] += x[i] > 0.0f ? gy[i] : slope * gy[i];
}

void clamp_avx2(float lo, float hi, float* x, size_t n) {
    const __m256 vlo = _mm256_set1_ps(lo);
    const __m256 vhi = _mm256_set1_ps(hi);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        v = _mm256_min_ps(_mm256_max_ps(v, vlo), vhi);
        _mm256_storeu_ps(x + i, v);
    }
    for (; i < n; ++i) x[i] = std::min(hi, std::max(lo, x[i]));
}

void sign_step_avx2(float a, const float* g, float* x, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 va = _mm256_set1_ps(a);
    const __m256 vna = _mm256_set1_ps(-a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gv = _mm256_loadu_ps(g + i);
        const __m256 pos = _mm256_cmp_ps(gv, zero, _CMP_GT_OQ);
        const __m256 neg = _mm256_cmp_ps(gv, zero, _CMP_LT_OQ);
        const __m256 step = _mm256_or_ps(_mm256_and_ps(pos, va), _mm256_and_ps(neg, vna));
        _mm256_storeu_ps(x + i, _mm256_add_ps(_mm256_loadu_ps(x + i), step));
    }
    for (; i < n; ++i) {
        const float s = g[i] > 0.0f ? 1.0f : (g[i] < 0.0f ? -1.0f : 0.0f);
        x[i] += a * s;
    }
}

void project_linf_avx2(const float* ref, float eps, float* x, size_t n) {
    const __m256 ve = _mm256_set1_ps(eps);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 r = _mm256_loadu_ps(ref + i);
        __m256 v = _mm256_loadu_ps(x + i);
        v = _mm256_max_ps(v, _mm256_sub_ps(r, ve));
        v = _mm256_min_ps(v, _mm256_add_ps(r, ve));
        _mm256_storeu_ps(x + i, v);
    }
    for (; i < n; ++i)
        x[i] = std::min(ref[i] + eps, std::max(ref[i] - eps, x[i]));
}

} // namespace

namespace detail {
const Kernels avx2_table = {
    sgemm_avx2, add_avx2, axpy_avx2, scale_avx2,
    mul_avx2,   dot_avx2, sum_avx2,  max_avx2,
    relu_fwd_avx2, relu_bwd_avx2, lrelu_fwd_avx2, lrelu_bwd_avx2,
    scalar_table.sigmoid_fwd, scalar_table.sigmoid_bwd, clamp_avx2, sign_step_avx2,
    project_linf_avx2, scalar_table.softmax_rows, "avx2",
};
} // namespace detail

} // namespace rsteal::kern

#endif // x86-64
