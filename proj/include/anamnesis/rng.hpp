#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "anamnesis/error.hpp"

namespace anamnesis {

// Seeded random source with a portable draw discipline.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The distributions are implemented here rather than taken from
// <random> because the standard leaves those implementation-defined:
//   uniform_index(n): draw u64 values r, rejecting r >= floor(2^64 / n) * n,
//                     and return r % n.
//   uniform01():      (r >> 11) * 2^-53, in [0, 1).
// Every golden trace in the test suite depends on exactly this mapping.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    std::size_t uniform_index(std::size_t n) {
        if (n == 0) {
            throw ContractError("uniform_index over an empty range");
        }
        const std::uint64_t span = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = (UINT64_MAX / span) * span;
        std::uint64_t r = engine_();
        while (r >= limit) {
            r = engine_();
        }
        return static_cast<std::size_t>(r % span);
    }

    // Inclusive on both ends.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi < lo) {
            throw ContractError("uniform_int with hi < lo");
        }
        return lo + static_cast<std::int64_t>(uniform_index(static_cast<std::size_t>(hi - lo) + 1));
    }

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Index drawn proportionally to non-negative weights (one uniform01 draw).
    std::size_t weighted_index(std::span<const double> weights);

    template <typename T>
    const T& pick(std::span<const T> items) {
        return items[uniform_index(items.size())];
    }

    // Independent stream for (seed, stream_index), e.g. one per case or session.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream_index);

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a, 64-bit. Stable across platforms, used wherever a string must map to
// a reproducible integer (hashing embedder, per-session streams).
std::uint64_t fnv1a64(std::string_view text);

}  // namespace anamnesis
