#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsteal/rng.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

// Grow-only store of synthesized batches. Every appended batch is one
// "epoch of record"; sampling is uniform with replacement over everything
// ever appended, so early batches keep their weight as the bank grows.
//
// Images are held 8-bit quantized by default (round(255 x), dequantized on
// read — error at most 1/510) which makes the persist/load round-trip exact;
// kF32 keeps raw floats for callers that cannot absorb quantization.
class MemoryBank {
public:
    enum class Storage { kU8, kF32 };

    explicit MemoryBank(Storage storage = Storage::kU8) : storage_(storage) {}

    // Appends an NCHW batch (first append fixes the image shape; later
    // appends must match or throw ShapeMismatch). Values are expected in
    // [0,1] for u8 storage. The batch becomes visible to sample() only once
    // the append completes.
    void append(const Tensor& batch);

    // n independent uniform draws over all stored samples. Throws EmptyBank.
    Tensor sample(int64_t n, Rng& rng) const;

    int64_t size() const { return count_; }
    int epochs_recorded() const { return static_cast<int>(epoch_sizes_.size()); }
    std::vector<int> image_shape() const { return image_shape_; } // {C,H,W}
    Storage storage() const { return storage_; }

    // Directory layout: <dir>/manifest.json plus one compressed
    // shard_<k>.bin per recorded epoch.
    void persist(const std::string& dir) const;
    static MemoryBank load(const std::string& dir);

private:
    Tensor decode_rows(const std::vector<int64_t>& rows) const;

    Storage storage_;
    std::vector<int> image_shape_; // set by first append
    int64_t count_ = 0;
    std::vector<int64_t> epoch_sizes_;
    std::vector<uint8_t> data_u8_;
    std::vector<float> data_f32_;
};

} // namespace rsteal
