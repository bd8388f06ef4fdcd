#include "rsteal/serialize.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "rsteal/errors.hpp"

namespace rsteal {

namespace {

constexpr uint32_t kMagic = 0x4d545352u; // "RSTM" little-endian
constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t get_u32(std::ifstream& f) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

} // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IOFailure("cannot open for write: " + tmp);
        put_u32(f, kMagic);
        put_u32(f, kVersion);
        put_u32(f, static_cast<uint32_t>(tensors.size()));
        for (const auto& [name, t] : tensors) {
            put_u32(f, static_cast<uint32_t>(name.size()));
            f.write(name.data(), static_cast<std::streamsize>(name.size()));
            put_u32(f, static_cast<uint32_t>(t->ndim()));
            for (const int d : t->shape()) put_u32(f, static_cast<uint32_t>(d));
            f.write(reinterpret_cast<const char*>(t->data()),
                    static_cast<std::streamsize>(t->numel() * sizeof(float)));
        }
        if (!f) throw IOFailure("short write: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IOFailure("cannot open for read: " + path);
    if (get_u32(f) != kMagic) throw IOFailure("bad checkpoint magic: " + path);
    if (get_u32(f) != kVersion) throw IOFailure("unsupported checkpoint version: " + path);
    const uint32_t count = get_u32(f);
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = get_u32(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        const uint32_t ndim = get_u32(f);
        std::vector<int> shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(get_u32(f));
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!f) throw IOFailure("truncated checkpoint: " + path);
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

void save_model(const std::string& path, nn::Model& model) {
    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (nn::Param* p : model.params()) entries.emplace_back(p->name, &p->value);
    for (nn::Param* b : model.buffers()) entries.emplace_back(b->name, &b->value);
    save_tensors(path, entries);
}

void load_model(const std::string& path, nn::Model& model) {
    auto loaded = load_tensors(path);
    std::vector<nn::Param*> slots = model.params();
    for (nn::Param* b : model.buffers()) slots.push_back(b);
    if (loaded.size() != slots.size())
        throw IOFailure("checkpoint tensor count " + std::to_string(loaded.size()) +
                        " does not match model (" + std::to_string(slots.size()) + ")");
    for (size_t i = 0; i < slots.size(); ++i) {
        if (loaded[i].first != slots[i]->name)
            throw IOFailure("checkpoint tensor '" + loaded[i].first +
                            "' does not match model slot '" + slots[i]->name + "'");
        if (!loaded[i].second.same_shape(slots[i]->value))
            throw IOFailure("shape mismatch for tensor '" + loaded[i].first + "'");
        slots[i]->value = std::move(loaded[i].second);
    }
}

std::vector<uint8_t> zlib_compress(const uint8_t* data, size_t n) {
    uLongf cap = compressBound(static_cast<uLong>(n));
    std::vector<uint8_t> out(cap);
    if (compress2(out.data(), &cap, data, static_cast<uLong>(n), Z_DEFAULT_COMPRESSION) != Z_OK)
        throw IOFailure("zlib compression failed");
    out.resize(cap);
    return out;
}

std::vector<uint8_t> zlib_decompress(const uint8_t* data, size_t n, size_t raw_size) {
    std::vector<uint8_t> out(raw_size);
    uLongf got = static_cast<uLongf>(raw_size);
    if (uncompress(out.data(), &got, data, static_cast<uLong>(n)) != Z_OK || got != raw_size)
        throw IOFailure("zlib decompression failed");
    return out;
}

namespace {

void png_chunk(std::ofstream& f, const char type[4], const std::vector<uint8_t>& payload) {
    auto put_be = [&](uint32_t v) {
        uint8_t b[4] = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                        static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
        f.write(reinterpret_cast<char*>(b), 4);
    };
    put_be(static_cast<uint32_t>(payload.size()));
    f.write(type, 4);
    if (!payload.empty())
        f.write(reinterpret_cast<const char*>(payload.data()),
                static_cast<std::streamsize>(payload.size()));
    uLong crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    if (!payload.empty()) crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
    put_be(static_cast<uint32_t>(crc));
}

} // namespace

void write_png(const std::string& path, int width, int height,
               const std::vector<uint8_t>& rgb) {
    if (static_cast<size_t>(width) * height * 3 != rgb.size())
        throw ShapeMismatch("png payload size does not match dimensions");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IOFailure("cannot open for write: " + path);
    const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr(13);
    auto be = [](uint32_t v, uint8_t* p) {
        p[0] = static_cast<uint8_t>(v >> 24);
        p[1] = static_cast<uint8_t>(v >> 16);
        p[2] = static_cast<uint8_t>(v >> 8);
        p[3] = static_cast<uint8_t>(v);
    };
    be(static_cast<uint32_t>(width), ihdr.data());
    be(static_cast<uint32_t>(height), ihdr.data() + 4);
    ihdr[8] = 8;  // bit depth
    ihdr[9] = 2;  // color type: truecolor
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    png_chunk(f, "IHDR", ihdr);

    // One filter byte (0 = none) per scanline, then deflate the whole image.
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + 3 * width));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const uint8_t* row = rgb.data() + static_cast<size_t>(y) * width * 3;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 3);
    }
    png_chunk(f, "IDAT", zlib_compress(raw.data(), raw.size()));
    png_chunk(f, "IEND", {});
    if (!f) throw IOFailure("short write: " + path);
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IOFailure("cannot open for write: " + tmp);
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw IOFailure("short write: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IOFailure("cannot open for read: " + path);
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

} // namespace rsteal
