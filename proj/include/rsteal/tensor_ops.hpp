#pragma once

#include "rsteal/rng.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

void add_(Tensor& y, const Tensor& x);
void axpy_(float a, const Tensor& x, Tensor& y);
void scale_(float a, Tensor& y);
void clamp_(Tensor& t, float lo, float hi);
void clamp01_(Tensor& t);

void fill_gaussian(Tensor& t, Rng& rng, float mean = 0.0f, float stddev = 1.0f);
void fill_uniform(Tensor& t, Rng& rng, float lo, float hi);

bool all_finite(const Tensor& t);

// row-wise softmax of an (N, K) logit matrix
Tensor softmax_rows(const Tensor& logits);

// argmax per row, ties broken toward the lowest class index
std::vector<int> argmax_rows(const Tensor& scores);

double mean(const Tensor& t);
float max_abs_diff(const Tensor& a, const Tensor& b);

} // namespace rsteal
