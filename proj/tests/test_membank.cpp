#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rsteal/errors.hpp"
#include "rsteal/membank.hpp"
#include "rsteal/rng.hpp"
#include "rsteal/tensor.hpp"
#include "rsteal/tensor_ops.hpp"

using namespace rsteal;

namespace {

std::string tmp_dir(const char* leaf) {
    const auto d = std::filesystem::temp_directory_path() / "rsteal_test_membank" / leaf;
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d.string();
}

Tensor batch01(int n, int c, int h, int w, Rng& rng) {
    Tensor t({n, c, h, w});
    fill_uniform(t, rng, 0.0f, 1.0f);
    return t;
}

} // namespace

TEST_CASE("append grows the bank; first batch fixes the shape") {
    MemoryBank bank;
    Rng rng(1);
    CHECK(bank.size() == 0);
    CHECK(bank.epochs_recorded() == 0);
    bank.append(batch01(8, 3, 4, 4, rng));
    bank.append(batch01(5, 3, 4, 4, rng));
    CHECK(bank.size() == 13);
    CHECK(bank.epochs_recorded() == 2);
    CHECK(bank.image_shape() == std::vector<int>{3, 4, 4});
    CHECK_THROWS_AS(bank.append(batch01(2, 3, 8, 8, rng)), ShapeMismatch);
    CHECK_THROWS_AS(bank.append(Tensor({0, 3, 4, 4})), ShapeMismatch);
    // A refused append leaves the bank unchanged.
    CHECK(bank.size() == 13);
    CHECK(bank.epochs_recorded() == 2);
}

TEST_CASE("sampling from an empty bank is refused") {
    MemoryBank bank;
    Rng rng(2);
    CHECK_THROWS_AS(bank.sample(4, rng), EmptyBank);
}

TEST_CASE("u8 quantization stays within half a quantization step") {
    MemoryBank bank; // default kU8
    Rng rng(3);
    Tensor x = batch01(16, 3, 8, 8, rng);
    bank.append(x);
    // Draw a big sample and match each drawn row back to a source row by
    // nearest distance; quantization error is bounded by 1/510 per pixel.
    Tensor s = bank.sample(16, rng);
    const int64_t px = 3 * 8 * 8;
    for (int i = 0; i < 16; ++i) {
        // Identify the source row via the first pixel.
        float best = 1e9f;
        int64_t src = -1;
        for (int64_t j = 0; j < 16; ++j) {
            const float d = std::abs(s[i * px] - x[j * px]);
            if (d < best) {
                best = d;
                src = j;
            }
        }
        for (int64_t k = 0; k < px; ++k)
            CHECK(std::abs(s[i * px + k] - x[src * px + k]) <= 1.0f / 510.0f + 1e-7f);
    }
}

TEST_CASE("f32 storage returns stored rows bit-for-bit") {
    MemoryBank bank(MemoryBank::Storage::kF32);
    Rng rng(4);
    Tensor x = batch01(4, 1, 2, 2, rng);
    bank.append(x);
    Tensor s = bank.sample(64, rng);
    const int64_t px = 4;
    for (int i = 0; i < 64; ++i) {
        bool matched = false;
        for (int64_t j = 0; j < 4 && !matched; ++j)
            matched = std::memcmp(s.data() + i * px, x.data() + j * px,
                                  sizeof(float) * px) == 0;
        CHECK(matched);
    }
}

TEST_CASE("sampling is uniform over the full history, not the last epoch") {
    // 100 appended epochs, one 1x1x1 image each, pixel value e/255 — the
    // dequantized pixel identifies the epoch of origin exactly. A uniform
    // sampler should hit each epoch ~n/100 times; chi-square with df=99
    // at p=0.01 rejects above 134.64.
    MemoryBank bank;
    const int epochs = 100;
    for (int e = 0; e < epochs; ++e) {
        Tensor img({1, 1, 1, 1});
        img[0] = static_cast<float>(e) / 255.0f;
        bank.append(img);
    }
    Rng rng(5);
    const int draws = 100000;
    Tensor s = bank.sample(draws, rng);
    std::vector<int64_t> hits(epochs, 0);
    for (int i = 0; i < draws; ++i) {
        const int e = static_cast<int>(std::lround(s[i] * 255.0f));
        REQUIRE(e >= 0);
        REQUIRE(e < epochs);
        ++hits[static_cast<size_t>(e)];
    }
    const double expect = static_cast<double>(draws) / epochs;
    double chi2 = 0.0;
    for (int64_t h : hits) {
        const double d = static_cast<double>(h) - expect;
        chi2 += d * d / expect;
    }
    CHECK(chi2 < 134.642); // chi2_{0.99, df=99}
    // Every epoch must be reachable at all.
    for (int64_t h : hits) CHECK(h > 0);
}

TEST_CASE("persist/load round-trips the bank bit-exactly") {
    const std::string dir = tmp_dir("roundtrip");
    MemoryBank bank;
    Rng rng(6);
    bank.append(batch01(6, 3, 4, 4, rng));
    bank.append(batch01(9, 3, 4, 4, rng));
    bank.append(batch01(1, 3, 4, 4, rng));
    bank.persist(dir);

    MemoryBank back = MemoryBank::load(dir);
    CHECK(back.size() == bank.size());
    CHECK(back.epochs_recorded() == 3);
    CHECK(back.image_shape() == bank.image_shape());
    CHECK(back.storage() == MemoryBank::Storage::kU8);

    // Equal rng state -> identical draws from both banks, bit for bit.
    Rng ra(77), rb(77);
    Tensor sa = bank.sample(64, ra);
    Tensor sb = back.sample(64, rb);
    REQUIRE(sa.numel() == sb.numel());
    CHECK(std::memcmp(sa.data(), sb.data(), sizeof(float) * sa.numel()) == 0);
}

TEST_CASE("persisted layout: manifest plus one shard per epoch") {
    const std::string dir = tmp_dir("layout");
    MemoryBank bank;
    Rng rng(7);
    bank.append(batch01(3, 1, 2, 2, rng));
    bank.append(batch01(4, 1, 2, 2, rng));
    bank.persist(dir);
    CHECK(std::filesystem::exists(dir + "/manifest.json"));
    CHECK(std::filesystem::exists(dir + "/shard_0.bin"));
    CHECK(std::filesystem::exists(dir + "/shard_1.bin"));
    CHECK_FALSE(std::filesystem::exists(dir + "/shard_2.bin"));
}

TEST_CASE("load rejects corrupted or inconsistent stores") {
    Rng rng(8);

    SUBCASE("missing manifest") {
        const std::string dir = tmp_dir("nomanifest");
        CHECK_THROWS_AS(MemoryBank::load(dir), IOFailure);
    }
    SUBCASE("unparseable manifest") {
        const std::string dir = tmp_dir("garbage");
        std::ofstream(dir + "/manifest.json") << "{{{";
        CHECK_THROWS_AS(MemoryBank::load(dir), CorruptManifest);
    }
    SUBCASE("missing shard") {
        const std::string dir = tmp_dir("noshard");
        MemoryBank bank;
        bank.append(batch01(2, 1, 2, 2, rng));
        bank.append(batch01(2, 1, 2, 2, rng));
        bank.persist(dir);
        std::filesystem::remove(dir + "/shard_1.bin");
        CHECK_THROWS_AS(MemoryBank::load(dir), IOFailure);
    }
    SUBCASE("count disagreement") {
        const std::string dir = tmp_dir("badcount");
        MemoryBank bank;
        bank.append(batch01(2, 1, 2, 2, rng));
        bank.persist(dir);
        // Rewrite the manifest claiming a different total.
        std::ifstream in(dir + "/manifest.json");
        std::string m((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        const auto pos = m.find("\"count\": 2");
        REQUIRE(pos != std::string::npos);
        m.replace(pos, 10, "\"count\": 5");
        std::ofstream(dir + "/manifest.json") << m;
        CHECK_THROWS_AS(MemoryBank::load(dir), CorruptManifest);
    }
    SUBCASE("truncated shard payload") {
        const std::string dir = tmp_dir("badshard");
        MemoryBank bank;
        bank.append(batch01(4, 1, 4, 4, rng));
        bank.persist(dir);
        const auto size = std::filesystem::file_size(dir + "/shard_0.bin");
        std::filesystem::resize_file(dir + "/shard_0.bin", size / 2);
        CHECK_THROWS(MemoryBank::load(dir));
    }
}
