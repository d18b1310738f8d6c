#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "memsync/core.hpp"

namespace memsync {

/// Deterministic uniform source owned by one task. Seeded from (seed, stream_id)
/// through std::seed_seq, so distinct stream ids give decorrelated engines.
///
/// Conversions to doubles and bounded integers are done here rather than through
/// <random> distributions, whose output is implementation-defined.
class RngStream {
public:
    RngStream(Seed seed, std::uint64_t stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed.value), static_cast<std::uint32_t>(seed.value >> 32),
                          static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                          0x6d656d73u /* "mems" */};
        engine_.seed(seq);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn from a discrete distribution given by `weights` (need not be normalized).
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        std::size_t last_positive = 0;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            if (weights[k] <= 0.0) continue;
            last_positive = k;
            if (u < weights[k]) return k;
            u -= weights[k];
        }
        return last_positive;
    }

private:
    std::mt19937_64 engine_;
};

inline RngStream rng_stream(Seed seed, std::uint64_t stream_id) { return RngStream(seed, stream_id); }

}  // namespace memsync
