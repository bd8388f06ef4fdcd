#include "rsteal/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "rsteal/kern/kernels.hpp"
#include "rsteal/tensor_ops.hpp"

namespace rsteal::nn {

using kern::K;

namespace {

void check_4d(const Tensor& x, const char* who) {
    if (x.ndim() != 4) throw ShapeMismatch(std::string(who) + ": expected NCHW, got " + x.shape_str());
}

// im2col for one image: (C,H,W) -> (C*k*k, oh*ow)
void im2col(const float* x, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
            float* cols) {
    for (int ch = 0; ch < c; ++ch) {
        const float* xc = x + static_cast<int64_t>(ch) * h * w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                float* crow = cols + (static_cast<int64_t>(ch) * k * k + ki * k + kj) *
                                         (static_cast<int64_t>(oh) * ow);
                for (int oi = 0; oi < oh; ++oi) {
                    const int hi = oi * stride - pad + ki;
                    float* dst = crow + static_cast<int64_t>(oi) * ow;
                    if (hi < 0 || hi >= h) {
                        std::memset(dst, 0, sizeof(float) * static_cast<size_t>(ow));
                        continue;
                    }
                    const float* src = xc + static_cast<int64_t>(hi) * w;
                    if (stride == 1) {
                        const int wj0 = -pad + kj;
                        int lo = std::max(0, -wj0);
                        int hi_j = std::min(ow, w - wj0);
                        if (lo > 0) std::memset(dst, 0, sizeof(float) * static_cast<size_t>(lo));
                        if (hi_j > lo)
                            std::memcpy(dst + lo, src + wj0 + lo,
                                        sizeof(float) * static_cast<size_t>(hi_j - lo));
                        if (hi_j < ow)
                            std::memset(dst + std::max(hi_j, 0), 0,
                                        sizeof(float) * static_cast<size_t>(ow - std::max(hi_j, 0)));
                    } else {
                        for (int oj = 0; oj < ow; ++oj) {
                            const int wj = oj * stride - pad + kj;
                            dst[oj] = (wj >= 0 && wj < w) ? src[wj] : 0.0f;
                        }
                    }
                }
            }
        }
    }
}

// transpose of im2col: scatter-add (C*k*k, oh*ow) back onto (C,H,W)
void col2im_add(const float* cols, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
                float* gx) {
    for (int ch = 0; ch < c; ++ch) {
        float* xc = gx + static_cast<int64_t>(ch) * h * w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const float* crow = cols + (static_cast<int64_t>(ch) * k * k + ki * k + kj) *
                                               (static_cast<int64_t>(oh) * ow);
                for (int oi = 0; oi < oh; ++oi) {
                    const int hi = oi * stride - pad + ki;
                    if (hi < 0 || hi >= h) continue;
                    const float* src = crow + static_cast<int64_t>(oi) * ow;
                    float* dst = xc + static_cast<int64_t>(hi) * w;
                    for (int oj = 0; oj < ow; ++oj) {
                        const int wj = oj * stride - pad + kj;
                        if (wj >= 0 && wj < w) dst[wj] += src[oj];
                    }
                }
            }
        }
    }
}

} // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(int in_features, int out_features) : in_(in_features), out_(out_features) {
    weight.value = Tensor({out_, in_});
    weight.grad = Tensor({out_, in_});
    bias.value = Tensor({out_});
    bias.grad = Tensor({out_});
}

Tensor Dense::forward(const Tensor& x, bool) {
    if (x.ndim() != 2 || x.dim(1) != in_)
        throw ShapeMismatch("Dense: expected (N," + std::to_string(in_) + "), got " + x.shape_str());
    x_ = x;
    const int n = x.dim(0);
    Tensor y({n, out_});
    K().sgemm(false, true, n, out_, in_, 1.0f, x.data(), in_, weight.value.data(), in_, 0.0f,
              y.data(), out_);
    for (int i = 0; i < n; ++i)
        K().add(y.data() + static_cast<int64_t>(i) * out_, bias.value.data(),
                static_cast<size_t>(out_));
    return y;
}

Tensor Dense::backward(const Tensor& gy, bool param_grads) {
    const int n = x_.dim(0);
    if (param_grads) {
        K().sgemm(true, false, out_, in_, n, 1.0f, gy.data(), out_, x_.data(), in_, 1.0f,
                  weight.grad.data(), in_);
        for (int i = 0; i < n; ++i)
            K().add(bias.grad.data(), gy.data() + static_cast<int64_t>(i) * out_,
                    static_cast<size_t>(out_));
    }
    Tensor gx({n, in_});
    K().sgemm(false, false, n, in_, out_, 1.0f, gy.data(), out_, weight.value.data(), in_, 0.0f,
              gx.data(), in_);
    return gx;
}

void Dense::collect_params(const std::string& prefix, std::vector<Param*>& out) {
    weight.name = prefix + ".weight";
    bias.name = prefix + ".bias";
    out.push_back(&weight);
    out.push_back(&bias);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad)
    : cin_(in_ch), cout_(out_ch), k_(ksize), stride_(stride), pad_(pad < 0 ? ksize / 2 : pad) {
    weight.value = Tensor({cout_, cin_ * k_ * k_});
    weight.grad = Tensor({cout_, cin_ * k_ * k_});
    bias.value = Tensor({cout_});
    bias.grad = Tensor({cout_});
}

Tensor Conv2d::forward(const Tensor& x, bool) {
    check_4d(x, "Conv2d");
    if (x.dim(1) != cin_) throw ShapeMismatch("Conv2d: channel mismatch " + x.shape_str());
    x_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    oh_ = (h + 2 * pad_ - k_) / stride_ + 1;
    ow_ = (w + 2 * pad_ - k_) / stride_ + 1;
    const int ckk = cin_ * k_ * k_;
    const int64_t spatial = static_cast<int64_t>(oh_) * ow_;
    Tensor y({n, cout_, oh_, ow_});
    std::vector<float> cols(static_cast<size_t>(ckk) * spatial);
    for (int i = 0; i < n; ++i) {
        im2col(x.data() + static_cast<int64_t>(i) * cin_ * h * w, cin_, h, w, k_, stride_, pad_,
               oh_, ow_, cols.data());
        float* yi = y.data() + static_cast<int64_t>(i) * cout_ * spatial;
        K().sgemm(false, false, cout_, static_cast<int>(spatial), ckk, 1.0f, weight.value.data(),
                  ckk, cols.data(), static_cast<int>(spatial), 0.0f, yi, static_cast<int>(spatial));
        for (int c = 0; c < cout_; ++c) {
            const float b = bias.value[c];
            float* row = yi + static_cast<int64_t>(c) * spatial;
            for (int64_t s = 0; s < spatial; ++s) row[s] += b;
        }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& gy, bool param_grads) {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const int ckk = cin_ * k_ * k_;
    const int64_t spatial = static_cast<int64_t>(oh_) * ow_;
    Tensor gx(x_.shape());
    std::vector<float> cols(static_cast<size_t>(ckk) * spatial);
    std::vector<float> gcols(static_cast<size_t>(ckk) * spatial);
    for (int i = 0; i < n; ++i) {
        const float* gyi = gy.data() + static_cast<int64_t>(i) * cout_ * spatial;
        if (param_grads) {
            im2col(x_.data() + static_cast<int64_t>(i) * cin_ * h * w, cin_, h, w, k_, stride_,
                   pad_, oh_, ow_, cols.data());
            K().sgemm(false, true, cout_, ckk, static_cast<int>(spatial), 1.0f, gyi,
                      static_cast<int>(spatial), cols.data(), static_cast<int>(spatial), 1.0f,
                      weight.grad.data(), ckk);
            for (int c = 0; c < cout_; ++c)
                bias.grad[c] += K().sum(gyi + static_cast<int64_t>(c) * spatial,
                                        static_cast<size_t>(spatial));
        }
        K().sgemm(true, false, ckk, static_cast<int>(spatial), cout_, 1.0f, weight.value.data(),
                  ckk, gyi, static_cast<int>(spatial), 0.0f, gcols.data(),
                  static_cast<int>(spatial));
        col2im_add(gcols.data(), cin_, h, w, k_, stride_, pad_, oh_, ow_,
                   gx.data() + static_cast<int64_t>(i) * cin_ * h * w);
    }
    return gx;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
    weight.name = prefix + ".weight";
    bias.name = prefix + ".bias";
    out.push_back(&weight);
    out.push_back(&bias);
}

// ------------------------------------------------------ DepthwiseConv2d

DepthwiseConv2d::DepthwiseConv2d(int channels, int stride) : ch_(channels), stride_(stride) {
    weight.value = Tensor({ch_, 9});
    weight.grad = Tensor({ch_, 9});
    bias.value = Tensor({ch_});
    bias.grad = Tensor({ch_});
}

Tensor DepthwiseConv2d::forward(const Tensor& x, bool) {
    check_4d(x, "DepthwiseConv2d");
    if (x.dim(1) != ch_) throw ShapeMismatch("DepthwiseConv2d: channel mismatch");
    x_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    oh_ = (h + 2 - 3) / stride_ + 1;
    ow_ = (w + 2 - 3) / stride_ + 1;
    Tensor y({n, ch_, oh_, ow_});
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < ch_; ++c) {
            const float* xc = x.data() + (static_cast<int64_t>(i) * ch_ + c) * h * w;
            const float* wc = weight.value.data() + static_cast<int64_t>(c) * 9;
            float* yc = y.data() + (static_cast<int64_t>(i) * ch_ + c) * oh_ * ow_;
            const float b = bias.value[c];
            for (int oi = 0; oi < oh_; ++oi) {
                for (int oj = 0; oj < ow_; ++oj) {
                    float acc = b;
                    for (int ki = 0; ki < 3; ++ki) {
                        const int hi = oi * stride_ - 1 + ki;
                        if (hi < 0 || hi >= h) continue;
                        for (int kj = 0; kj < 3; ++kj) {
                            const int wj = oj * stride_ - 1 + kj;
                            if (wj < 0 || wj >= w) continue;
                            acc += wc[ki * 3 + kj] * xc[static_cast<int64_t>(hi) * w + wj];
                        }
                    }
                    yc[static_cast<int64_t>(oi) * ow_ + oj] = acc;
                }
            }
        }
    }
    return y;
}

Tensor DepthwiseConv2d::backward(const Tensor& gy, bool param_grads) {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    Tensor gx(x_.shape());
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < ch_; ++c) {
            const float* xc = x_.data() + (static_cast<int64_t>(i) * ch_ + c) * h * w;
            const float* gyc = gy.data() + (static_cast<int64_t>(i) * ch_ + c) * oh_ * ow_;
            float* gxc = gx.data() + (static_cast<int64_t>(i) * ch_ + c) * h * w;
            const float* wc = weight.value.data() + static_cast<int64_t>(c) * 9;
            float* gwc = weight.grad.data() + static_cast<int64_t>(c) * 9;
            for (int oi = 0; oi < oh_; ++oi) {
                for (int oj = 0; oj < ow_; ++oj) {
                    const float g = gyc[static_cast<int64_t>(oi) * ow_ + oj];
                    if (param_grads) bias.grad[c] += g;
                    for (int ki = 0; ki < 3; ++ki) {
                        const int hi = oi * stride_ - 1 + ki;
                        if (hi < 0 || hi >= h) continue;
                        for (int kj = 0; kj < 3; ++kj) {
                            const int wj = oj * stride_ - 1 + kj;
                            if (wj < 0 || wj >= w) continue;
                            if (param_grads)
                                gwc[ki * 3 + kj] += g * xc[static_cast<int64_t>(hi) * w + wj];
                            gxc[static_cast<int64_t>(hi) * w + wj] += g * wc[ki * 3 + kj];
                        }
                    }
                }
            }
        }
    }
    return gx;
}

void DepthwiseConv2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
    weight.name = prefix + ".weight";
    bias.name = prefix + ".bias";
    out.push_back(&weight);
    out.push_back(&bias);
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, float eps, float momentum)
    : ch_(channels), eps_(eps), momentum_(momentum) {
    gamma.value = Tensor({ch_});
    gamma.value.fill(1.0f);
    gamma.grad = Tensor({ch_});
    beta.value = Tensor({ch_});
    beta.grad = Tensor({ch_});
    running_mean.value = Tensor({ch_});
    running_var.value = Tensor({ch_});
    running_var.value.fill(1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
    check_4d(x, "BatchNorm2d");
    if (x.dim(1) != ch_) throw ShapeMismatch("BatchNorm2d: channel mismatch");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t hw = static_cast<int64_t>(h) * w;
    const int64_t count = static_cast<int64_t>(n) * hw;
    xshape_ = x.shape();
    Tensor y(x.shape());
    trained_fwd_ = train;
    if (train) {
        xhat_ = Tensor(x.shape());
        batch_inv_std_.assign(static_cast<size_t>(ch_), 0.0f);
        for (int c = 0; c < ch_; ++c) {
            double s = 0.0, s2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const float* xc = x.data() + (static_cast<int64_t>(i) * ch_ + c) * hw;
                for (int64_t j = 0; j < hw; ++j) {
                    s += xc[j];
                    s2 += static_cast<double>(xc[j]) * xc[j];
                }
            }
            const double m = s / static_cast<double>(count);
            const double var = std::max(0.0, s2 / static_cast<double>(count) - m * m);
            const float inv_std = static_cast<float>(1.0 / std::sqrt(var + eps_));
            batch_inv_std_[static_cast<size_t>(c)] = inv_std;
            const float mf = static_cast<float>(m);
            const float g = gamma.value[c], b = beta.value[c];
            for (int i = 0; i < n; ++i) {
                const int64_t off = (static_cast<int64_t>(i) * ch_ + c) * hw;
                const float* xc = x.data() + off;
                float* xh = xhat_.data() + off;
                float* yc = y.data() + off;
                for (int64_t j = 0; j < hw; ++j) {
                    xh[j] = (xc[j] - mf) * inv_std;
                    yc[j] = g * xh[j] + b;
                }
            }
            if (!stats_frozen_) {
                const double unbiased =
                    count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1)
                              : var;
                running_mean.value[c] = (1.0f - momentum_) * running_mean.value[c] +
                                        momentum_ * static_cast<float>(m);
                running_var.value[c] = (1.0f - momentum_) * running_var.value[c] +
                                       momentum_ * static_cast<float>(unbiased);
            }
        }
    } else {
        eval_scale_.assign(static_cast<size_t>(ch_), 0.0f);
        for (int c = 0; c < ch_; ++c) {
            const float scale =
                gamma.value[c] / std::sqrt(running_var.value[c] + eps_);
            eval_scale_[static_cast<size_t>(c)] = scale;
            const float shift = beta.value[c] - scale * running_mean.value[c];
            for (int i = 0; i < n; ++i) {
                const int64_t off = (static_cast<int64_t>(i) * ch_ + c) * hw;
                const float* xc = x.data() + off;
                float* yc = y.data() + off;
                for (int64_t j = 0; j < hw; ++j) yc[j] = scale * xc[j] + shift;
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy, bool param_grads) {
    const int n = xshape_[0], h = xshape_[2], w = xshape_[3];
    const int64_t hw = static_cast<int64_t>(h) * w;
    const int64_t count = static_cast<int64_t>(n) * hw;
    Tensor gx(xshape_);
    if (!trained_fwd_) {
        // eval-mode backward: input gradients only (attack/probe crafting)
        for (int c = 0; c < ch_; ++c) {
            const float scale = eval_scale_[static_cast<size_t>(c)];
            for (int i = 0; i < n; ++i) {
                const int64_t off = (static_cast<int64_t>(i) * ch_ + c) * hw;
                const float* g = gy.data() + off;
                float* out = gx.data() + off;
                for (int64_t j = 0; j < hw; ++j) out[j] = scale * g[j];
            }
        }
        return gx;
    }
    for (int c = 0; c < ch_; ++c) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int i = 0; i < n; ++i) {
            const int64_t off = (static_cast<int64_t>(i) * ch_ + c) * hw;
            const float* g = gy.data() + off;
            const float* xh = xhat_.data() + off;
            for (int64_t j = 0; j < hw; ++j) {
                sum_gy += g[j];
                sum_gy_xhat += static_cast<double>(g[j]) * xh[j];
            }
        }
        if (param_grads) {
            gamma.grad[c] += static_cast<float>(sum_gy_xhat);
            beta.grad[c] += static_cast<float>(sum_gy);
        }
        const float g_scale = gamma.value[c] * batch_inv_std_[static_cast<size_t>(c)] /
                              static_cast<float>(count);
        const float mg = static_cast<float>(sum_gy);
        const float mgx = static_cast<float>(sum_gy_xhat);
        for (int i = 0; i < n; ++i) {
            const int64_t off = (static_cast<int64_t>(i) * ch_ + c) * hw;
            const float* g = gy.data() + off;
            const float* xh = xhat_.data() + off;
            float* out = gx.data() + off;
            for (int64_t j = 0; j < hw; ++j)
                out[j] = g_scale * (static_cast<float>(count) * g[j] - mg - xh[j] * mgx);
        }
    }
    return gx;
}

void BatchNorm2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
    gamma.name = prefix + ".gamma";
    beta.name = prefix + ".beta";
    out.push_back(&gamma);
    out.push_back(&beta);
}

void BatchNorm2d::collect_buffers(const std::string& prefix, std::vector<Param*>& out) {
    running_mean.name = prefix + ".running_mean";
    running_var.name = prefix + ".running_var";
    out.push_back(&running_mean);
    out.push_back(&running_var);
}

// ------------------------------------------------------------ activations

Tensor ReLU::forward(const Tensor& x, bool) {
    x_ = x;
    Tensor y(x.shape());
    K().relu_fwd(x.data(), y.data(), static_cast<size_t>(x.numel()));
    return y;
}

Tensor ReLU::backward(const Tensor& gy, bool) {
    Tensor gx(x_.shape());
    K().relu_bwd(x_.data(), gy.data(), gx.data(), static_cast<size_t>(gy.numel()));
    return gx;
}

Tensor LeakyReLU::forward(const Tensor& x, bool) {
    x_ = x;
    Tensor y(x.shape());
    K().lrelu_fwd(slope_, x.data(), y.data(), static_cast<size_t>(x.numel()));
    return y;
}

Tensor LeakyReLU::backward(const Tensor& gy, bool) {
    Tensor gx(x_.shape());
    K().lrelu_bwd(slope_, x_.data(), gy.data(), gx.data(), static_cast<size_t>(gy.numel()));
    return gx;
}

Tensor Sigmoid::forward(const Tensor& x, bool) {
    Tensor y(x.shape());
    K().sigmoid_fwd(x.data(), y.data(), static_cast<size_t>(x.numel()));
    y_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& gy, bool) {
    Tensor gx(y_.shape());
    K().sigmoid_bwd(y_.data(), gy.data(), gx.data(), static_cast<size_t>(gy.numel()));
    return gx;
}

// --------------------------------------------------------------- pooling

Tensor MaxPool2d::forward(const Tensor& x, bool) {
    check_4d(x, "MaxPool2d");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = h / k_, ow = w / k_;
    xshape_ = x.shape();
    Tensor y({n, c, oh, ow});
    argmax_.assign(static_cast<size_t>(y.numel()), 0);
    int64_t oidx = 0;
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float* xc = x.data() + (static_cast<int64_t>(i) * c + ch) * h * w;
            for (int oi = 0; oi < oh; ++oi) {
                for (int oj = 0; oj < ow; ++oj, ++oidx) {
                    float best = -std::numeric_limits<float>::infinity();
                    int32_t bidx = 0;
                    for (int ki = 0; ki < k_; ++ki) {
                        for (int kj = 0; kj < k_; ++kj) {
                            const int hi = oi * k_ + ki, wj = oj * k_ + kj;
                            const float v = xc[static_cast<int64_t>(hi) * w + wj];
                            if (v > best) {
                                best = v;
                                bidx = static_cast<int32_t>(hi * w + wj);
                            }
                        }
                    }
                    y[oidx] = best;
                    argmax_[static_cast<size_t>(oidx)] = bidx;
                }
            }
        }
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& gy, bool) {
    const int n = xshape_[0], c = xshape_[1], h = xshape_[2], w = xshape_[3];
    Tensor gx(xshape_);
    const int64_t hw = static_cast<int64_t>(h) * w;
    const int64_t per_ch = gy.numel() / (static_cast<int64_t>(n) * c);
    int64_t oidx = 0;
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            float* gxc = gx.data() + (static_cast<int64_t>(i) * c + ch) * hw;
            for (int64_t s = 0; s < per_ch; ++s, ++oidx)
                gxc[argmax_[static_cast<size_t>(oidx)]] += gy[oidx];
        }
    return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
    check_4d(x, "GlobalAvgPool");
    const int n = x.dim(0), c = x.dim(1);
    const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    xshape_ = x.shape();
    Tensor y({n, c});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            y.at2(i, ch) = K().sum(x.data() + (static_cast<int64_t>(i) * c + ch) * hw,
                                   static_cast<size_t>(hw)) /
                           static_cast<float>(hw);
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gy, bool) {
    const int n = xshape_[0], c = xshape_[1];
    const int64_t hw = static_cast<int64_t>(xshape_[2]) * xshape_[3];
    Tensor gx(xshape_);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float g = gy.at2(i, ch) / static_cast<float>(hw);
            float* out = gx.data() + (static_cast<int64_t>(i) * c + ch) * hw;
            for (int64_t j = 0; j < hw; ++j) out[j] = g;
        }
    return gx;
}

// ---------------------------------------------------------------- reshape

Tensor Flatten::forward(const Tensor& x, bool) {
    xshape_ = x.shape();
    return x.reshaped({x.dim(0), static_cast<int>(x.numel() / x.dim(0))});
}

Tensor Flatten::backward(const Tensor& gy, bool) { return gy.reshaped(xshape_); }

Tensor Unflatten2d::forward(const Tensor& x, bool) {
    return x.reshaped({x.dim(0), c_, hw_, hw_});
}

Tensor Unflatten2d::backward(const Tensor& gy, bool) {
    return gy.reshaped({gy.dim(0), c_ * hw_ * hw_});
}

Tensor UpsampleNearest2x::forward(const Tensor& x, bool) {
    check_4d(x, "UpsampleNearest2x");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    xshape_ = x.shape();
    Tensor y({n, c, 2 * h, 2 * w});
    for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
        const float* src = x.data() + nc * h * w;
        float* dst = y.data() + nc * 4 * h * w;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const float v = src[static_cast<int64_t>(i) * w + j];
                float* d = dst + (static_cast<int64_t>(2 * i) * 2 * w + 2 * j);
                d[0] = v;
                d[1] = v;
                d[2 * w] = v;
                d[2 * w + 1] = v;
            }
    }
    return y;
}

Tensor UpsampleNearest2x::backward(const Tensor& gy, bool) {
    const int n = xshape_[0], c = xshape_[1], h = xshape_[2], w = xshape_[3];
    Tensor gx(xshape_);
    for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
        const float* src = gy.data() + nc * 4 * h * w;
        float* dst = gx.data() + nc * h * w;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const float* s = src + (static_cast<int64_t>(2 * i) * 2 * w + 2 * j);
                dst[static_cast<int64_t>(i) * w + j] = s[0] + s[1] + s[2 * w] + s[2 * w + 1];
            }
    }
    return gx;
}

// ------------------------------------------------------------- containers

Tensor Sequential::forward(const Tensor& x, bool train) {
    Tensor cur = x;
    for (auto& l : layers_) cur = l->forward(cur, train);
    return cur;
}

Tensor Sequential::backward(const Tensor& gy, bool param_grads) {
    Tensor cur = gy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        cur = (*it)->backward(cur, param_grads);
    return cur;
}

void Sequential::collect_params(const std::string& prefix, std::vector<Param*>& out) {
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect_params(prefix + "." + std::to_string(i), out);
}

void Sequential::collect_buffers(const std::string& prefix, std::vector<Param*>& out) {
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect_buffers(prefix + "." + std::to_string(i), out);
}

ResidualBlock::ResidualBlock(LayerPtr main, LayerPtr shortcut, bool post_relu)
    : main_(std::move(main)), shortcut_(std::move(shortcut)), post_relu_(post_relu) {}

Tensor ResidualBlock::forward(const Tensor& x, bool train) {
    Tensor s = main_->forward(x, train);
    if (shortcut_) {
        add_(s, shortcut_->forward(x, train));
    } else {
        add_(s, x);
    }
    if (!post_relu_) return s;
    pre_relu_ = s;
    Tensor y(s.shape());
    K().relu_fwd(s.data(), y.data(), static_cast<size_t>(s.numel()));
    return y;
}

Tensor ResidualBlock::backward(const Tensor& gy, bool param_grads) {
    Tensor g;
    if (post_relu_) {
        g = Tensor(pre_relu_.shape());
        K().relu_bwd(pre_relu_.data(), gy.data(), g.data(), static_cast<size_t>(gy.numel()));
    } else {
        g = gy;
    }
    Tensor gx = main_->backward(g, param_grads);
    if (shortcut_) {
        add_(gx, shortcut_->backward(g, param_grads));
    } else {
        add_(gx, g);
    }
    return gx;
}

void ResidualBlock::collect_params(const std::string& prefix, std::vector<Param*>& out) {
    main_->collect_params(prefix + ".main", out);
    if (shortcut_) shortcut_->collect_params(prefix + ".shortcut", out);
}

void ResidualBlock::collect_buffers(const std::string& prefix, std::vector<Param*>& out) {
    main_->collect_buffers(prefix + ".main", out);
    if (shortcut_) shortcut_->collect_buffers(prefix + ".shortcut", out);
}

Tensor AddSkip::forward(const Tensor& x, bool train) {
    Tensor y = main_->forward(x, train);
    add_(y, x);
    return y;
}

Tensor AddSkip::backward(const Tensor& gy, bool param_grads) {
    Tensor gx = main_->backward(gy, param_grads);
    add_(gx, gy);
    return gx;
}

void AddSkip::collect_params(const std::string& prefix, std::vector<Param*>& out) {
    main_->collect_params(prefix + ".main", out);
}

void AddSkip::collect_buffers(const std::string& prefix, std::vector<Param*>& out) {
    main_->collect_buffers(prefix + ".main", out);
}

} // namespace rsteal::nn
