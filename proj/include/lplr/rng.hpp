#pragma once
//
// rng.hpp — deterministic counter-based random streams.
//
// Every random quantity in the library (sketch entries, dither draws, test
// data) is a pure function of a 64-bit seed and integer coordinates, produced
// by chaining splitmix64 finalizer rounds over (seed, i, j[, k]). That makes
// generation order-independent: parallel and sequential schedules emit
// bit-identical values, and re-running any pipeline with the same seed
// reproduces it exactly.
//
// Uniforms take the top 53 bits, giving doubles in [0, 1). Normals use the
// Box-Muller cosine branch on two tagged uniforms (one normal per coordinate).
//

#include <cstdint>

namespace lplr {
namespace rng {

// splitmix64 finalizer: a bijective 64-bit avalanche round.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
    return mix64(mix64(mix64(seed) ^ i) ^ j);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t i, std::uint64_t j, std::uint64_t k) {
    return mix64(mix64(mix64(mix64(seed) ^ i) ^ j) ^ k);
}

// Derives an independent child seed (retry attempts, per-factor dither streams).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(mix64(seed) ^ tag);
}

inline double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform in [0, 1), keyed by (seed, i, j).
inline double uniform(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
    return to_unit(key(seed, i, j));
}

// Standard normal keyed by (seed, i, j): Box-Muller cosine branch on two
// tagged uniforms; 1-u1 shifts the log argument into (0, 1].
double normal(std::uint64_t seed, std::uint64_t i, std::uint64_t j);

// A sequential stream view over the keyed generator, for call sites that want
// "the next draw" semantics (scalar quantization, test harnesses).
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_(stream_id) {}

    double uniform() { return to_unit(key(seed_, stream_, counter_++)); }
    double normal();

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

} // namespace rng
} // namespace lplr
