#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace lcp {

// Deterministic random source. All randomness in the project flows from one
// root seed through named substreams (see derive_seed), so components can be
// reseeded independently and every run is reproducible bit for bit.
//
// The uniform/normal transforms are implemented here rather than taken from
// <random> distributions because the standard leaves those implementation
// defined; this keeps outputs identical across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
    double normal() {
        // u1 in (0, 1] so the log is finite.
        double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Uniform integer in [0, n). n must be positive.
    int64_t uniform_int(int64_t n) {
        return static_cast<int64_t>(gen_() % static_cast<uint64_t>(n));
    }

private:
    std::mt19937_64 gen_;
};

/// Mixes (root, stream name, index) into an independent substream seed.
uint64_t derive_seed(uint64_t root, std::string_view stream, uint64_t index = 0);

inline Rng make_stream(uint64_t root, std::string_view stream, uint64_t index = 0) {
    return Rng(derive_seed(root, stream, index));
}

/// Fisher-Yates shuffle driven by Rng (std::shuffle is implementation defined).
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
    for (int64_t i = static_cast<int64_t>(values.size()) - 1; i > 0; --i) {
        int64_t j = rng.uniform_int(i + 1);
        std::swap(values[i], values[j]);
    }
}

} // namespace lcp
