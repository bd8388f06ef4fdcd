#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rsteal/augment.hpp"
#include "rsteal/rng.hpp"
#include "rsteal/tensor.hpp"
#include "rsteal/tensor_ops.hpp"

using namespace rsteal;

namespace {

Tensor rand_batch(int n, int c, int h, int w, Rng& rng, float lo = 0.0f, float hi = 1.0f) {
    Tensor t({n, c, h, w});
    fill_uniform(t, rng, lo, hi);
    return t;
}

} // namespace

TEST_CASE("standard augment is a pad-crop-flip index remap") {
    // Single image with a unique value per pixel: every output pixel must be
    // either zero (pad region) or an exact copy of some input pixel, and the
    // copy pattern must be one rigid (shift, optional mirror) map.
    const int h = 8, w = 8;
    Tensor x({1, 1, h, w});
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(i + 1);

    Rng rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        StandardAugment aug;
        Tensor y = aug.apply(x, rng);
        REQUIRE(y.shape() == x.shape());

        // The output must equal SOME member of the pad-4 crop x flip family.
        // Enumerate every (dh, dw, flip) hypothesis and demand exactly a
        // full-image match for at least one.
        bool any_match = false;
        for (int dh = -4; dh <= 4 && !any_match; ++dh)
            for (int dw = -4; dw <= 4 && !any_match; ++dw)
                for (int f = 0; f < 2 && !any_match; ++f) {
                    bool ok = true;
                    for (int oh = 0; oh < h && ok; ++oh)
                        for (int ow = 0; ow < w && ok; ++ow) {
                            int sh = oh + dh, sw = ow + dw;
                            if (f) sw = w - 1 - sw;
                            const float expect = (sh >= 0 && sh < h && sw >= 0 && sw < w)
                                                     ? x.at4(0, 0, sh, sw)
                                                     : 0.0f;
                            ok = y.at4(0, 0, oh, ow) == expect;
                        }
                    any_match = ok;
                }
        CHECK(any_match);
    }
}

TEST_CASE("standard augment draws independent offsets per image") {
    Rng rng(33);
    Tensor x({16, 1, 8, 8});
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = 1.0f;
    StandardAugment aug;
    Tensor y = aug.apply(x, rng);
    // With identical all-ones inputs, differing crops show up as differing
    // zero-pad patterns across the batch.
    int distinct = 1;
    const int64_t px = 8 * 8;
    for (int n = 1; n < 16; ++n) {
        bool same = true;
        for (int64_t k = 0; k < px && same; ++k) same = y[n * px + k] == y[k];
        distinct += !same;
    }
    CHECK(distinct > 1);
}

TEST_CASE("standard augment backward is the exact adjoint") {
    // For a linear map A, <A x, u> == <x, A^T u> for all x, u. This pins the
    // backward routing to the forward's exact source pixels.
    Rng rng(5);
    Tensor x = rand_batch(3, 2, 8, 8, rng);
    StandardAugment aug;
    Tensor ax = aug.apply(x, rng);

    Tensor u = rand_batch(3, 2, 8, 8, rng, -1.0f, 1.0f);
    Tensor atu = aug.backward(u);
    REQUIRE(atu.shape() == x.shape());

    double lhs = 0.0, rhs = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        lhs += static_cast<double>(ax[i]) * static_cast<double>(u[i]);
        rhs += static_cast<double>(x[i]) * static_cast<double>(atu[i]);
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("strong augment keeps shape and the [0,1] range") {
    Rng rng(13);
    Tensor x = rand_batch(6, 3, 32, 32, rng);
    Tensor y = strong_augment(x, rng);
    REQUIRE(y.shape() == x.shape());
    for (int64_t i = 0; i < y.numel(); ++i) {
        CHECK(y[i] >= 0.0f);
        CHECK(y[i] <= 1.0f);
    }
}

TEST_CASE("strong augment actually perturbs and differs per draw") {
    Rng rng(14);
    Tensor x = rand_batch(2, 3, 32, 32, rng);
    Tensor a = strong_augment(x, rng);
    Tensor b = strong_augment(x, rng);
    double da = 0.0, dab = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        da += std::abs(static_cast<double>(a[i]) - static_cast<double>(x[i]));
        dab += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    }
    CHECK(da / static_cast<double>(x.numel()) > 1e-3);
    CHECK(dab / static_cast<double>(x.numel()) > 1e-3);
}

TEST_CASE("strong augment replays exactly on an equal rng state") {
    Rng r1(99), r2(99);
    Rng rng(1);
    Tensor x = rand_batch(2, 3, 32, 32, rng);
    Tensor a = strong_augment(x, r1);
    Tensor b = strong_augment(x, r2);
    bool identical = true;
    for (int64_t i = 0; i < a.numel(); ++i) identical = identical && a[i] == b[i];
    CHECK(identical);
}
