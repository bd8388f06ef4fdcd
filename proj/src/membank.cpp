#include "rsteal/membank.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "rsteal/errors.hpp"
#include "rsteal/serialize.hpp"

namespace rsteal {

using json = nlohmann::json;

namespace {
constexpr uint32_t kShardMagic = 0x4b425352u; // "RSBK"
}

void MemoryBank::append(const Tensor& batch) {
    if (batch.ndim() != 4 || batch.shape()[0] <= 0)
        throw ShapeMismatch("bank append expects a non-empty NCHW batch, got " + batch.shape_str());
    const std::vector<int> img{batch.shape()[1], batch.shape()[2], batch.shape()[3]};
    if (image_shape_.empty())
        image_shape_ = img;
    else if (image_shape_ != img)
        throw ShapeMismatch("bank image shape changed: " + batch.shape_str());

    const int64_t n = batch.shape()[0];
    const int64_t total = batch.numel();
    // Stage into a local buffer first so a mid-append failure can't leave a
    // torn sample visible; the epoch is committed by the final appends.
    if (storage_ == Storage::kU8) {
        std::vector<uint8_t> staged(static_cast<size_t>(total));
        for (int64_t i = 0; i < total; ++i) {
            const float v = std::min(1.0f, std::max(0.0f, batch.data()[i]));
            staged[static_cast<size_t>(i)] = static_cast<uint8_t>(std::lround(v * 255.0f));
        }
        data_u8_.insert(data_u8_.end(), staged.begin(), staged.end());
    } else {
        data_f32_.insert(data_f32_.end(), batch.data(), batch.data() + total);
    }
    epoch_sizes_.push_back(n);
    count_ += n;
}

Tensor MemoryBank::decode_rows(const std::vector<int64_t>& rows) const {
    const int64_t px = image_shape_[0] * image_shape_[1] * image_shape_[2];
    Tensor out({static_cast<int>(rows.size()), image_shape_[0], image_shape_[1], image_shape_[2]});
    for (size_t i = 0; i < rows.size(); ++i) {
        float* dst = out.data() + static_cast<int64_t>(i) * px;
        if (storage_ == Storage::kU8) {
            const uint8_t* src = data_u8_.data() + rows[i] * px;
            for (int64_t j = 0; j < px; ++j) dst[j] = static_cast<float>(src[j]) / 255.0f;
        } else {
            std::memcpy(dst, data_f32_.data() + rows[i] * px, sizeof(float) * px);
        }
    }
    return out;
}

Tensor MemoryBank::sample(int64_t n, Rng& rng) const {
    if (count_ == 0) throw EmptyBank("sample from an empty bank");
    if (n <= 0) throw EmptyBank("sample size must be positive");
    std::vector<int64_t> rows(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) rows[static_cast<size_t>(i)] = rng.uniform_index(count_);
    return decode_rows(rows);
}

void MemoryBank::persist(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const int64_t px = image_shape_.empty()
                           ? 0
                           : image_shape_[0] * image_shape_[1] * image_shape_[2];
    const size_t elem = storage_ == Storage::kU8 ? 1 : sizeof(float);
    int64_t row = 0;
    for (size_t k = 0; k < epoch_sizes_.size(); ++k) {
        const int64_t n = epoch_sizes_[k];
        const size_t raw_len = static_cast<size_t>(n * px) * elem;
        const uint8_t* raw = storage_ == Storage::kU8
                                 ? data_u8_.data() + row * px
                                 : reinterpret_cast<const uint8_t*>(data_f32_.data() + row * px);
        const std::vector<uint8_t> payload = zlib_compress(raw, raw_len);
        const std::string path = dir + "/shard_" + std::to_string(k) + ".bin";
        std::ofstream f(path + ".tmp", std::ios::binary);
        if (!f) throw IOFailure("cannot open for write: " + path);
        auto put_u32 = [&f](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
        auto put_u64 = [&f](uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
        put_u32(kShardMagic);
        put_u32(storage_ == Storage::kU8 ? 0u : 1u);
        put_u32(static_cast<uint32_t>(n));
        put_u64(static_cast<uint64_t>(raw_len));
        f.write(reinterpret_cast<const char*>(payload.data()),
                static_cast<std::streamsize>(payload.size()));
        if (!f) throw IOFailure("short write: " + path);
        f.close();
        fs::rename(path + ".tmp", path);
        row += n;
    }
    json m;
    m["count"] = count_;
    m["image_shape"] = image_shape_;
    m["epochs_recorded"] = epochs_recorded();
    m["dtype"] = storage_ == Storage::kU8 ? "u8" : "f32";
    write_text_atomic(dir + "/manifest.json", m.dump(2) + "\n");
}

MemoryBank MemoryBank::load(const std::string& dir) {
    json m;
    try {
        m = json::parse(read_text(dir + "/manifest.json"));
    } catch (const IOFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw CorruptManifest(std::string("unparseable manifest: ") + e.what());
    }
    const std::string dtype = m.at("dtype").get<std::string>();
    if (dtype != "u8" && dtype != "f32") throw CorruptManifest("unknown dtype: " + dtype);
    MemoryBank bank(dtype == "u8" ? Storage::kU8 : Storage::kF32);
    bank.image_shape_ = m.at("image_shape").get<std::vector<int>>();
    if (bank.image_shape_.size() != 3) throw CorruptManifest("image_shape must be C,H,W");
    const int epochs = m.at("epochs_recorded").get<int>();
    const int64_t px = bank.image_shape_[0] * bank.image_shape_[1] * bank.image_shape_[2];
    const size_t elem = bank.storage_ == Storage::kU8 ? 1 : sizeof(float);

    for (int k = 0; k < epochs; ++k) {
        const std::string path = dir + "/shard_" + std::to_string(k) + ".bin";
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IOFailure("missing shard: " + path);
        auto get_u32 = [&f]() { uint32_t v = 0; f.read(reinterpret_cast<char*>(&v), 4); return v; };
        auto get_u64 = [&f]() { uint64_t v = 0; f.read(reinterpret_cast<char*>(&v), 8); return v; };
        if (get_u32() != kShardMagic) throw IOFailure("bad shard magic: " + path);
        const uint32_t shard_dtype = get_u32();
        if ((shard_dtype == 0) != (bank.storage_ == Storage::kU8))
            throw CorruptManifest("shard dtype disagrees with manifest: " + path);
        const int64_t n = get_u32();
        const size_t raw_len = get_u64();
        if (raw_len != static_cast<size_t>(n * px) * elem)
            throw CorruptManifest("shard size disagrees with image shape: " + path);
        std::vector<uint8_t> payload((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
        const std::vector<uint8_t> raw = zlib_decompress(payload.data(), payload.size(), raw_len);
        if (bank.storage_ == Storage::kU8) {
            bank.data_u8_.insert(bank.data_u8_.end(), raw.begin(), raw.end());
        } else {
            const size_t old = bank.data_f32_.size();
            bank.data_f32_.resize(old + raw.size() / sizeof(float));
            std::memcpy(bank.data_f32_.data() + old, raw.data(), raw.size());
        }
        bank.epoch_sizes_.push_back(n);
        bank.count_ += n;
    }
    if (bank.count_ != m.at("count").get<int64_t>())
        throw CorruptManifest("manifest count " + m["count"].dump() + " != loaded " +
                              std::to_string(bank.count_));
    return bank;
}

} // namespace rsteal
