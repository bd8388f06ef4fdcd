#include "rsteal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "rsteal/errors.hpp"
#include "rsteal/tensor_ops.hpp"

namespace rsteal {

Tensor Dataset::gather(const std::vector<int64_t>& idx) const {
    const auto& s = images.shape();
    const int64_t row = images.numel() / std::max<int64_t>(s[0], 1);
    std::vector<int> out_shape = s; // keep trailing dims whatever the rank
    out_shape[0] = static_cast<int>(idx.size());
    Tensor out(out_shape);
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= s[0])
            throw ShapeMismatch("gather index out of range");
        std::memcpy(out.data() + static_cast<int64_t>(i) * row,
                    images.data() + idx[i] * row, sizeof(float) * row);
    }
    return out;
}

namespace {

void read_cifar_file(const std::string& path, int label_bytes, int num_classes,
                     std::vector<float>& pixels, std::vector<int>& labels) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DatasetMissing("missing archive file: " + path);
    constexpr int kPixels = 3 * 32 * 32;
    std::vector<uint8_t> rec(static_cast<size_t>(label_bytes) + kPixels);
    while (f.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(rec.size()))) {
        // CIFAR-100 records carry coarse then fine label; the fine one is last.
        const int label = rec[label_bytes - 1];
        if (label < 0 || label >= num_classes)
            throw IOFailure("label out of range in " + path);
        labels.push_back(label);
        for (int i = 0; i < kPixels; ++i)
            pixels.push_back(static_cast<float>(rec[label_bytes + i]) / 255.0f);
    }
    if (f.gcount() != 0) throw IOFailure("truncated record in " + path);
}

Dataset from_flat(std::vector<float> pixels, std::vector<int> labels, int num_classes,
                  std::string id) {
    Dataset d;
    const int n = static_cast<int>(labels.size());
    d.images = Tensor({n, 3, 32, 32});
    std::memcpy(d.images.data(), pixels.data(), sizeof(float) * pixels.size());
    d.labels = std::move(labels);
    d.num_classes = num_classes;
    d.id = std::move(id);
    return d;
}

} // namespace

Dataset load_cifar(const std::string& dir, const std::string& which, bool train) {
    std::vector<float> pixels;
    std::vector<int> labels;
    if (which == "cifar10") {
        std::vector<std::string> files;
        if (train)
            for (int i = 1; i <= 5; ++i) files.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
        else
            files.push_back(dir + "/test_batch.bin");
        for (const auto& f : files) read_cifar_file(f, 1, 10, pixels, labels);
        return from_flat(std::move(pixels), std::move(labels), 10, "cifar10");
    }
    if (which == "cifar100") {
        read_cifar_file(dir + (train ? "/train.bin" : "/test.bin"), 2, 100, pixels, labels);
        return from_flat(std::move(pixels), std::move(labels), 100, "cifar100");
    }
    throw ConfigInvalid("unknown archive dataset: " + which);
}

Dataset make_synthetic(int64_t n, int num_classes, uint64_t seed) {
    if (n <= 0) throw EmptyDataset("synthetic dataset needs n > 0");
    if (num_classes < 2) throw ConfigInvalid("synthetic dataset needs >= 2 classes");
    Dataset d;
    d.images = Tensor({static_cast<int>(n), 3, 32, 32});
    d.labels.resize(static_cast<size_t>(n));
    d.num_classes = num_classes;
    d.id = "synth" + std::to_string(num_classes);
    Rng rng(seed);

    // Fixed per-class signature: grating orientation, spatial frequency, a
    // channel mix for the grating, and a base color. Signal amplitudes sit
    // far above the 8/255 probe radius so a margin-seeking model can be
    // robust while a plain fit stays brittle.
    const double pi = 3.14159265358979323846;
    for (int64_t i = 0; i < n; ++i) {
        // Round-robin labels keep every prefix of the set near-balanced.
        const int c = static_cast<int>(i % num_classes);
        d.labels[static_cast<size_t>(i)] = c;
        const double theta = pi * c / num_classes;
        const double freq = 2.0 + (c % 5);
        // Phase is a class attribute; the per-sample jitter is kept small so
        // same-class images stay correlated (random phase would make two
        // same-class gratings anti-correlate as often as not).
        const double phase = 2.0 * pi * ((c * 29) % num_classes) / num_classes +
                             rng.uniform(-0.35, 0.35);
        const float base[3] = {0.35f + 0.3f * static_cast<float>((c * 37 % num_classes)) / num_classes,
                               0.35f + 0.3f * static_cast<float>((c * 17 % num_classes)) / num_classes,
                               0.35f + 0.3f * static_cast<float>((c * 53 % num_classes)) / num_classes};
        const float mix[3] = {1.0f, (c % 2) ? -0.6f : 0.6f, (c % 3) ? 0.4f : -0.4f};
        for (int h = 0; h < 32; ++h)
            for (int w = 0; w < 32; ++w) {
                const double u = (h * std::cos(theta) + w * std::sin(theta)) / 32.0;
                const float g = 0.28f * static_cast<float>(std::sin(2.0 * pi * freq * u + phase));
                for (int ch = 0; ch < 3; ++ch) {
                    float v = base[ch] + mix[ch] * g + 0.05f * static_cast<float>(rng.gaussian());
                    d.images.at4(i, ch, h, w) = std::min(1.0f, std::max(0.0f, v));
                }
            }
    }
    return d;
}

Dataset load_dataset(const std::string& id, const std::string& data_dir, bool train, int64_t n) {
    if (id == "cifar10" || id == "cifar100") return load_cifar(data_dir, id, train);
    if (id == "synth10") return make_synthetic(n, 10, train ? 11u : 12u);
    if (id == "synth100") return make_synthetic(n, 100, train ? 11u : 12u);
    throw ConfigInvalid("unknown dataset id: " + id);
}

Dataset subset(const Dataset& d, int64_t n, Rng& rng) {
    if (n <= 0 || d.size() == 0) throw EmptyDataset("subset of empty range");
    n = std::min(n, d.size());
    std::vector<int64_t> order = epoch_order(d.size(), rng);
    order.resize(static_cast<size_t>(n));
    Dataset out;
    out.images = d.gather(order);
    out.labels.reserve(static_cast<size_t>(n));
    for (int64_t i : order) out.labels.push_back(d.labels[static_cast<size_t>(i)]);
    out.num_classes = d.num_classes;
    out.id = d.id;
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& d, double frac, Rng& rng) {
    if (frac <= 0.0 || frac >= 1.0) throw ConfigInvalid("split fraction must be in (0,1)");
    std::vector<int64_t> order = epoch_order(d.size(), rng);
    const int64_t cut = static_cast<int64_t>(std::llround(frac * static_cast<double>(d.size())));
    auto take = [&](int64_t lo, int64_t hi) {
        std::vector<int64_t> idx(order.begin() + lo, order.begin() + hi);
        Dataset out;
        out.images = d.gather(idx);
        for (int64_t i : idx) out.labels.push_back(d.labels[static_cast<size_t>(i)]);
        out.num_classes = d.num_classes;
        out.id = d.id;
        return out;
    };
    return {take(0, cut), take(cut, d.size())};
}

std::vector<int64_t> epoch_order(int64_t size, Rng& rng) {
    std::vector<int64_t> order(static_cast<size_t>(size));
    for (int64_t i = 0; i < size; ++i) order[static_cast<size_t>(i)] = i;
    // Fisher-Yates with our own stream so orders replay across platforms.
    for (int64_t i = size - 1; i > 0; --i) {
        const int64_t j = rng.uniform_index(i + 1);
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    return order;
}

} // namespace rsteal
