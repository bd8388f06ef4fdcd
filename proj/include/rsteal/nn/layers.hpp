#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rsteal/tensor.hpp"

namespace rsteal::nn {

struct Param {
    Tensor value;
    Tensor grad;
    std::string name;
};

// Forward caches whatever backward needs; backward must follow the forward it
// belongs to. Parameter gradients accumulate until the optimizer clears them.
// param_grads=false skips weight-gradient work for input-gradient-only passes
// (probe and attack crafting).
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& gy, bool param_grads = true) = 0;
    virtual void collect_params(const std::string& prefix, std::vector<Param*>& out) { (void)prefix; (void)out; }
    // non-trainable state that still belongs in checkpoints (BN running stats)
    virtual void collect_buffers(const std::string& prefix, std::vector<Param*>& out) { (void)prefix; (void)out; }
    // While frozen, train-mode forwards still use batch statistics but leave
    // running estimates untouched — used when a two-branch loss has to
    // re-forward one branch purely to rebuild backward caches.
    virtual void set_stats_frozen(bool frozen) { (void)frozen; }
};

using LayerPtr = std::unique_ptr<Layer>;

class Dense : public Layer {
public:
    Dense(int in_features, int out_features);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;
    void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
    Param weight; // (out, in)
    Param bias;   // (out)

private:
    int in_, out_;
    Tensor x_;
};

class Conv2d : public Layer {
public:
    Conv2d(int in_ch, int out_ch, int ksize, int stride = 1, int pad = -1); // pad<0 => same-ish (k/2)
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;
    void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
    Param weight; // (out_ch, in_ch*k*k)
    Param bias;   // (out_ch)
    int in_ch() const { return cin_; }
    int out_ch() const { return cout_; }

private:
    int cin_, cout_, k_, stride_, pad_;
    Tensor x_;
    int oh_ = 0, ow_ = 0;
};

// 3x3 depthwise convolution (one filter per channel)
class DepthwiseConv2d : public Layer {
public:
    DepthwiseConv2d(int channels, int stride = 1);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;
    void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
    Param weight; // (channels, 9)
    Param bias;   // (channels)

private:
    int ch_, stride_;
    Tensor x_;
    int oh_ = 0, ow_ = 0;
};

class BatchNorm2d : public Layer {
public:
    explicit BatchNorm2d(int channels, float eps = 1e-5f, float momentum = 0.1f);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;
    void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<Param*>& out) override;
    void set_stats_frozen(bool frozen) override { stats_frozen_ = frozen; }
    Param gamma, beta;
    Param running_mean, running_var;

private:
    int ch_;
    float eps_, momentum_;
    bool stats_frozen_ = false;
    bool trained_fwd_ = false;
    Tensor xhat_;                    // train-mode cache
    std::vector<float> batch_inv_std_;
    std::vector<float> eval_scale_;  // eval-mode cache: gamma / sqrt(rvar + eps)
    std::vector<int> xshape_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;

private:
    Tensor x_;
};

class LeakyReLU : public Layer {
public:
    explicit LeakyReLU(float slope = 0.2f) : slope_(slope) {}
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;

private:
    float slope_;
    Tensor x_;
};

class Sigmoid : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;

private:
    Tensor y_;
};

class MaxPool2d : public Layer {
public:
    explicit MaxPool2d(int ksize = 2) : k_(ksize) {}
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;

private:
    int k_;
    std::vector<int> xshape_;
    std::vector<int32_t> argmax_;
};

class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;

private:
    std::vector<int> xshape_;
};

class Flatten : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;

private:
    std::vector<int> xshape_;
};

// (N, C) -> (N, C, hw, hw)
class Unflatten2d : public Layer {
public:
    Unflatten2d(int channels, int hw) : c_(channels), hw_(hw) {}
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;

private:
    int c_, hw_;
};

class UpsampleNearest2x : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;

private:
    std::vector<int> xshape_;
};

class Sequential : public Layer {
public:
    Sequential() = default;
    explicit Sequential(std::vector<LayerPtr> layers) : layers_(std::move(layers)) {}
    void push(LayerPtr l) { layers_.push_back(std::move(l)); }
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;
    void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<Param*>& out) override;
    void set_stats_frozen(bool frozen) override {
        for (auto& l : layers_) l->set_stats_frozen(frozen);
    }
    size_t size() const { return layers_.size(); }
    Layer& at(size_t i) { return *layers_[i]; }

private:
    std::vector<LayerPtr> layers_;
};

// y = relu(main(x) + shortcut(x)); identity shortcut when none given.
// post_relu=false drops the trailing relu (pre-activation blocks).
class ResidualBlock : public Layer {
public:
    ResidualBlock(LayerPtr main, LayerPtr shortcut /*nullable*/, bool post_relu = true);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;
    void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<Param*>& out) override;
    void set_stats_frozen(bool frozen) override {
        main_->set_stats_frozen(frozen);
        if (shortcut_) shortcut_->set_stats_frozen(frozen);
    }

private:
    LayerPtr main_, shortcut_;
    bool post_relu_;
    Tensor pre_relu_;
};

// elementwise residual add without the trailing relu (inverted residual blocks)
class AddSkip : public Layer {
public:
    explicit AddSkip(LayerPtr main) : main_(std::move(main)) {}
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy, bool param_grads) override;
    void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<Param*>& out) override;
    void set_stats_frozen(bool frozen) override { main_->set_stats_frozen(frozen); }

private:
    LayerPtr main_;
};

} // namespace rsteal::nn
