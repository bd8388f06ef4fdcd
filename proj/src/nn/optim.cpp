#include "rsteal/nn/optim.hpp"

#include <cmath>

namespace rsteal::nn {

Sgd::Sgd(std::vector<Param*> params, float lr, float momentum, float weight_decay)
    : Optimizer(std::move(params), lr), momentum_(momentum), wd_(weight_decay) {
    velocity_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i)
        velocity_[i].assign(static_cast<size_t>(params_[i]->value.numel()), 0.0f);
}

void Sgd::step() {
    for (size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        float* w = p.value.data();
        const float* g = p.grad.data();
        float* v = velocity_[i].data();
        const int64_t n = p.value.numel();
        for (int64_t j = 0; j < n; ++j) {
            const float gj = g[j] + wd_ * w[j];
            v[j] = momentum_ * v[j] + gj;
            w[j] -= lr_ * v[j];
        }
    }
}

Adam::Adam(std::vector<Param*> params, float lr, float beta1, float beta2, float eps)
    : Optimizer(std::move(params), lr), b1_(beta1), b2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(static_cast<size_t>(params_[i]->value.numel()), 0.0f);
        v_[i].assign(static_cast<size_t>(params_[i]->value.numel()), 0.0f);
    }
}

void Adam::step() {
    ++t_;
    const float c1 = 1.0f - std::pow(b1_, static_cast<float>(t_));
    const float c2 = 1.0f - std::pow(b2_, static_cast<float>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        float* w = p.value.data();
        const float* g = p.grad.data();
        float* m = m_[i].data();
        float* v = v_[i].data();
        const int64_t n = p.value.numel();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = b1_ * m[j] + (1.0f - b1_) * g[j];
            v[j] = b2_ * v[j] + (1.0f - b2_) * g[j] * g[j];
            const float mhat = m[j] / c1;
            const float vhat = v[j] / c2;
            w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

} // namespace rsteal::nn
