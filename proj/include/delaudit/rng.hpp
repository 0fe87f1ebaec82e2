#pragma once

#include <cstdint>
#include <string_view>

#include "delaudit/bytes.hpp"

namespace delaudit {

inline std::uint64_t mix64(std::uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic stream generator. Not cryptographic; all that matters here is
// reproducibility of executions from a 64-bit seed, identical on any platform.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1); 53 mantissa bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_unit() < p; }
};

// Role seed = keyed mix of (master_seed, role label, trial index, stream label).
// Pure function of its inputs; distinct labels give independent streams.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view role,
                                 std::uint64_t trial_index, std::string_view stream = "") {
    std::uint64_t h = mix64(master_seed ^ 0x6c077361746e6f64ull);
    h = mix64(h ^ fnv1a64(role));
    h = mix64(h ^ trial_index);
    if (!stream.empty()) h = mix64(h ^ fnv1a64(stream));
    return h;
}

// One lambda-bit identifier, big-endian packed into ceil(lambda/8) bytes with
// the unused high bits of the first byte masked off.
inline Bytes sample_bits(SplitMix64& rng, std::uint32_t lambda) {
    const std::size_t nbytes = (lambda + 7) / 8;
    Bytes out;
    out.reserve(nbytes);
    std::uint64_t word = 0;
    int avail = 0;
    for (std::size_t i = 0; i < nbytes; ++i) {
        if (avail == 0) {
            word = rng.next();
            avail = 8;
        }
        out.push_back(static_cast<char>(word & 0xff));
        word >>= 8;
        --avail;
    }
    if (lambda % 8 != 0) {
        const unsigned keep = lambda % 8;
        out[0] = static_cast<char>(static_cast<unsigned char>(out[0]) & ((1u << keep) - 1));
    }
    return out;
}

}  // namespace delaudit
