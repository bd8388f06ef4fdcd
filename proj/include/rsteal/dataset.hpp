#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rsteal/rng.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

// In-memory labeled image set. Images are NCHW float32 in [0,1].
struct Dataset {
    Tensor images{std::vector<int>{0, 3, 32, 32}};
    std::vector<int> labels;
    int num_classes = 0;
    std::string id;

    int64_t size() const { return images.dim(0); }
    // Copies the rows at `idx` into a fresh batch.
    Tensor gather(const std::vector<int64_t>& idx) const;
};

// Reads the standard CIFAR binary archives from a local directory:
// CIFAR-10 expects data_batch_{1..5}.bin / test_batch.bin (1 label byte +
// 3072 pixel bytes per record), CIFAR-100 expects train.bin / test.bin
// (coarse+fine label bytes; the fine label is used). Throws DatasetMissing
// when the files are absent and IOFailure on malformed records.
Dataset load_cifar(const std::string& dir, const std::string& which, bool train);

// Procedurally generated 32x32x3 image set with `num_classes` classes, used
// for desk-scale runs where no archive is available. Each class is a fixed
// oriented sinusoidal grating over a class base color, plus per-sample phase
// jitter and Gaussian pixel noise; deterministic in (n, num_classes, seed).
Dataset make_synthetic(int64_t n, int num_classes, uint64_t seed);

// Resolves a dataset id ("cifar10" / "cifar100" / "synth10" / "synth100")
// to an in-memory set. Synthetic ids take their sample count from `n`;
// archive ids ignore it and read the full split from `data_dir`.
Dataset load_dataset(const std::string& id, const std::string& data_dir, bool train,
                     int64_t n = 10000);

// First-n subset after a seeded shuffle. Throws EmptyDataset when n <= 0 or
// the source is empty.
Dataset subset(const Dataset& d, int64_t n, Rng& rng);

// Disjoint random split: first part has round(frac * size) samples.
std::pair<Dataset, Dataset> split(const Dataset& d, double frac, Rng& rng);

// Epoch iteration order: a seeded shuffle of [0, size).
std::vector<int64_t> epoch_order(int64_t size, Rng& rng);

} // namespace rsteal
