#include "lcp/rng.hpp"

namespace lcp {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

uint64_t derive_seed(uint64_t root, std::string_view stream, uint64_t index) {
    uint64_t h = splitmix64(root ^ fnv1a(stream));
    return splitmix64(h ^ splitmix64(index + 0x51ed2701449c0f87ULL));
}

} // namespace lcp
