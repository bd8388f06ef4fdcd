#pragma once

#include <vector>

#include "rsteal/rng.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

// Standard training augmentation: random crop from a 4-pixel zero pad plus
// horizontal flip (p=0.5), drawn per image. Both ops are index remappings,
// so the pipeline is linear in the input and `backward` routes output
// gradients to the exact source pixels — needed when a synthesis loss is
// taken on augmented generator output.
class StandardAugment {
public:
    Tensor apply(const Tensor& x, Rng& rng);
    Tensor backward(const Tensor& gy) const;

private:
    std::vector<int> off_h_, off_w_;
    std::vector<uint8_t> flip_;
    std::vector<int> in_shape_;
};

// Heavy pipeline applied to memory-bank samples before probe construction:
// center crop 32->28, bilinear resize back to 32, horizontal/vertical flips
// (p=0.5 each), rotation uniform in ±15 degrees, Gaussian pixel noise
// sigma=0.05, clamp to [0,1]. No gradient path — probes differentiate with
// respect to the augmented image itself.
Tensor strong_augment(const Tensor& x, Rng& rng);

} // namespace rsteal
