#pragma once

#include <vector>

#include "rsteal/nn/layers.hpp"

namespace rsteal::nn {

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step() = 0;
    void set_lr(float lr) { lr_ = lr; }
    float lr() const { return lr_; }

protected:
    explicit Optimizer(std::vector<Param*> params, float lr)
        : params_(std::move(params)), lr_(lr) {}
    std::vector<Param*> params_;
    float lr_;
};

// v = mu*v + (g + wd*w);  w -= lr*v
class Sgd : public Optimizer {
public:
    Sgd(std::vector<Param*> params, float lr, float momentum = 0.0f, float weight_decay = 0.0f);
    void step() override;

private:
    float momentum_, wd_;
    std::vector<std::vector<float>> velocity_;
};

// bias-corrected Adam; defaults follow the generator-training setup (beta1 = 0.5)
class Adam : public Optimizer {
public:
    Adam(std::vector<Param*> params, float lr, float beta1 = 0.5f, float beta2 = 0.999f,
         float eps = 1e-8f);
    void step() override;

private:
    float b1_, b2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

} // namespace rsteal::nn
