#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "rsteal/errors.hpp"

namespace rsteal {

// Dense row-major float32 tensor. All model math in this project runs on
// float; the few statistics that need more headroom accumulate in double.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), 0.0f);
    }

    Tensor(std::vector<int> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != static_cast<int64_t>(data_.size()))
            throw ShapeMismatch("tensor data size does not match shape");
    }

    static Tensor scalar(float v) { return Tensor({1}, {v}); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& vec() { return data_; }
    const std::vector<float>& vec() const { return data_; }

    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // NCHW convenience accessor
    float& at4(int n, int c, int h, int w) {
        return data_[static_cast<size_t>(((int64_t(n) * dim(1) + c) * dim(2) + h) * dim(3) + w)];
    }
    float at4(int n, int c, int h, int w) const {
        return data_[static_cast<size_t>(((int64_t(n) * dim(1) + c) * dim(2) + h) * dim(3) + w)];
    }

    float& at2(int r, int c) { return data_[static_cast<size_t>(int64_t(r) * dim(1) + c)]; }
    float at2(int r, int c) const { return data_[static_cast<size_t>(int64_t(r) * dim(1) + c)]; }

    Tensor reshaped(std::vector<int> shape) const {
        if (count(shape) != numel())
            throw ShapeMismatch("reshape changes element count");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

    static int64_t count(const std::vector<int>& shape) {
        int64_t n = 1;
        for (const int d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

// N images as (N, C, H, W) values in [0, 1]
using ImageBatch = Tensor;
// N class indices in [0, K)
using HardLabelBatch = std::vector<int>;

} // namespace rsteal
