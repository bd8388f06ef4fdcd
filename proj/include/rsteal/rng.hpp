#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace rsteal {

// mt19937 with hand-rolled transforms. std::*_distribution output is
// implementation-defined, which would break byte-identical reruns, so the
// uniform/gaussian mappings live here.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : gen_(static_cast<std::mt19937_64::result_type>(seed)) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1) with 53 random bits
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int64_t uniform_index(int64_t n) {
        return static_cast<int64_t>(uniform() * static_cast<double>(n)) % n;
    }

    // Box-Muller, no pair caching
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Independent child stream; tag keeps phases (data/init/aug/...) decoupled.
    Rng fork(std::string_view tag) const {
        uint64_t h = 1469598103934665603ull; // FNV-1a
        for (const char c : tag) {
            h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
            h *= 1099511628211ull;
        }
        return Rng(h ^ state_hash());
    }

    Rng fork(uint64_t salt) const { return Rng(state_hash() ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull)); }

private:
    uint64_t state_hash() const {
        auto copy = gen_;
        return copy();
    }

    std::mt19937_64 gen_;
};

} // namespace rsteal
