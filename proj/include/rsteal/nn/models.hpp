#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rsteal/nn/layers.hpp"
#include "rsteal/rng.hpp"

namespace rsteal::nn {

// A network plus its identity: owns the layer graph, exposes flat parameter /
// buffer lists for optimizers and checkpoints.
class Model {
public:
    Model() = default;
    Model(std::string arch, LayerPtr net, int num_classes)
        : arch_(std::move(arch)), net_(std::move(net)), classes_(num_classes) {
        refresh_lists();
    }

    Tensor forward(const Tensor& x, bool train) { return net_->forward(x, train); }
    // full backprop into parameter .grad slots; returns input gradient
    Tensor backward(const Tensor& gy) { return net_->backward(gy, true); }
    // input gradient only (adversarial example / probe crafting)
    Tensor backward_input(const Tensor& gy) { return net_->backward(gy, false); }

    const std::vector<Param*>& params() { return params_; }
    const std::vector<Param*>& buffers() { return buffers_; }
    void zero_grads() {
        for (auto* p : params_) p->grad.fill(0.0f);
    }
    int64_t param_count() const {
        int64_t n = 0;
        for (const auto* p : params_) n += p->value.numel();
        return n;
    }

    const std::string& arch() const { return arch_; }
    int num_classes() const { return classes_; }
    bool empty() const { return net_ == nullptr; }
    // see Layer::set_stats_frozen
    void set_stats_frozen(bool frozen) { net_->set_stats_frozen(frozen); }

private:
    void refresh_lists() {
        params_.clear();
        buffers_.clear();
        net_->collect_params(arch_, params_);
        net_->collect_buffers(arch_, buffers_);
    }

    std::string arch_;
    LayerPtr net_;
    int classes_ = 0;
    std::vector<Param*> params_;
    std::vector<Param*> buffers_;
};

using ModelPtr = std::shared_ptr<Model>;

// Classifier factory. Known arch ids: "toy_mlp", "smallcnn", "resnet8",
// "resnet18", "resnet34", "wrn34_10", "mobilenetv2". Throws UnknownPreset.
ModelPtr make_classifier(const std::string& arch, int num_classes, Rng& rng);

// 32x32 RGB image generator: latent (N, latent_dim) -> images (N,3,32,32) in [0,1].
// base_channels scales the conv trunk width (128 full-scale, smaller for desk runs).
ModelPtr make_generator(int latent_dim, Rng& rng, int base_channels = 128);

bool is_known_arch(const std::string& arch);
std::vector<std::string> known_archs();

} // namespace rsteal::nn
