#include "rsteal/augment.hpp"

#include <cmath>

#include "rsteal/errors.hpp"
#include "rsteal/tensor_ops.hpp"

namespace rsteal {

namespace {
constexpr int kPad = 4;
}

Tensor StandardAugment::apply(const Tensor& x, Rng& rng) {
    if (x.ndim() != 4) throw ShapeMismatch("augment expects NCHW, got " + x.shape_str());
    const auto& s = x.shape();
    const int64_t n = s[0], c = s[1], hh = s[2], ww = s[3];
    in_shape_ = s;
    off_h_.resize(static_cast<size_t>(n));
    off_w_.resize(static_cast<size_t>(n));
    flip_.resize(static_cast<size_t>(n));
    Tensor y(s);
    for (int64_t i = 0; i < n; ++i) {
        const int dh = static_cast<int>(rng.uniform_index(2 * kPad + 1));
        const int dw = static_cast<int>(rng.uniform_index(2 * kPad + 1));
        const bool fl = rng.bernoulli(0.5);
        off_h_[static_cast<size_t>(i)] = dh;
        off_w_[static_cast<size_t>(i)] = dw;
        flip_[static_cast<size_t>(i)] = fl ? 1 : 0;
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t h = 0; h < hh; ++h)
                for (int64_t w = 0; w < ww; ++w) {
                    // Output pixel (h,w) reads padded coord (h+dh, w+dw);
                    // subtracting the pad gives the source pixel or falls
                    // outside, which reads as zero padding.
                    const int64_t sh = h + dh - kPad;
                    int64_t sw = w + dw - kPad;
                    if (fl) sw = ww - 1 - sw;
                    float v = 0.0f;
                    if (sh >= 0 && sh < hh && sw >= 0 && sw < ww) v = x.at4(i, ch, sh, sw);
                    y.at4(i, ch, h, w) = v;
                }
    }
    return y;
}

Tensor StandardAugment::backward(const Tensor& gy) const {
    if (gy.shape() != in_shape_) throw ShapeMismatch("augment backward shape mismatch");
    const int64_t n = in_shape_[0], c = in_shape_[1], hh = in_shape_[2], ww = in_shape_[3];
    Tensor gx(in_shape_);
    for (int64_t i = 0; i < n; ++i) {
        const int dh = off_h_[static_cast<size_t>(i)];
        const int dw = off_w_[static_cast<size_t>(i)];
        const bool fl = flip_[static_cast<size_t>(i)] != 0;
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t h = 0; h < hh; ++h)
                for (int64_t w = 0; w < ww; ++w) {
                    const int64_t sh = h + dh - kPad;
                    int64_t sw = w + dw - kPad;
                    if (fl) sw = ww - 1 - sw;
                    if (sh >= 0 && sh < hh && sw >= 0 && sw < ww)
                        gx.at4(i, ch, sh, sw) += gy.at4(i, ch, h, w);
                }
    }
    return gx;
}

namespace {

float bilinear(const Tensor& x, int64_t i, int64_t ch, double sh, double sw,
               int64_t hh, int64_t ww) {
    const int64_t h0 = static_cast<int64_t>(std::floor(sh));
    const int64_t w0 = static_cast<int64_t>(std::floor(sw));
    const double fh = sh - static_cast<double>(h0);
    const double fw = sw - static_cast<double>(w0);
    auto px = [&](int64_t h, int64_t w) -> double {
        if (h < 0 || h >= hh || w < 0 || w >= ww) return 0.0;
        return x.at4(i, ch, h, w);
    };
    return static_cast<float>((1 - fh) * ((1 - fw) * px(h0, w0) + fw * px(h0, w0 + 1)) +
                              fh * ((1 - fw) * px(h0 + 1, w0) + fw * px(h0 + 1, w0 + 1)));
}

} // namespace

Tensor strong_augment(const Tensor& x, Rng& rng) {
    if (x.ndim() != 4) throw ShapeMismatch("augment expects NCHW, got " + x.shape_str());
    const auto& s = x.shape();
    const int64_t n = s[0], c = s[1], hh = s[2], ww = s[3];
    const int64_t crop_h = std::max<int64_t>(hh - 4, 1);
    const int64_t crop_w = std::max<int64_t>(ww - 4, 1);
    const double pi = 3.14159265358979323846;
    Tensor y(s);
    for (int64_t i = 0; i < n; ++i) {
        const bool flip_h = rng.bernoulli(0.5);
        const bool flip_v = rng.bernoulli(0.5);
        const double angle = rng.uniform(-15.0, 15.0) * pi / 180.0;
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double ch_off = (hh - crop_h) / 2.0;
        const double cw_off = (ww - crop_w) / 2.0;
        const double cy = (hh - 1) / 2.0, cx = (ww - 1) / 2.0;
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t h = 0; h < hh; ++h)
                for (int64_t w = 0; w < ww; ++w) {
                    // Walk the output pixel back through rotate -> flips ->
                    // resize -> center crop to a source coordinate, then
                    // sample bilinearly once for the whole chain.
                    double rh = ca * (h - cy) - sa * (w - cx) + cy;
                    double rw = sa * (h - cy) + ca * (w - cx) + cx;
                    if (flip_h) rw = (ww - 1) - rw;
                    if (flip_v) rh = (hh - 1) - rh;
                    const double sh = rh * static_cast<double>(crop_h) / hh + ch_off;
                    const double sw = rw * static_cast<double>(crop_w) / ww + cw_off;
                    float v = bilinear(x, i, ch, sh, sw, hh, ww);
                    v += 0.05f * static_cast<float>(rng.gaussian());
                    y.at4(i, ch, h, w) = std::min(1.0f, std::max(0.0f, v));
                }
    }
    return y;
}

} // namespace rsteal
