#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nudgerl {

// Named substreams derived from one master seed. Every stochastic component
// pulls from its own stream, so consuming draws on one stream never shifts
// another. This is what makes exact reduction tests possible (e.g. nudged
// sampling with p_drop = 1 reproduces plain group sampling bit-for-bit on a
// shared trajectory stream while still burning context draws).
enum class Stream : std::uint64_t {
    Init = 1,        // benchmark generation
    Trajectory = 2,  // rollout sampling
    Context = 3,     // context draw + dropout mask
    Eval = 4,        // evaluation sampling
};

// splitmix64 finalizer; decorrelates nearby seeds.
std::uint64_t mix64(std::uint64_t x);

// Combines (master seed, stream tag, a, b) into one substream seed.
std::uint64_t substream_seed(std::uint64_t master, Stream stream,
                             std::uint64_t a = 0, std::uint64_t b = 0);

// A single deterministic stream. All helpers consume exactly one draw from
// the underlying engine per call; callers rely on this to keep stream
// consumption invariant across configuration changes.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    // Uniform double in [0, 1), 53 bits of mantissa. One draw.
    double u01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). One draw.
    int uniform_int(int n) {
        return static_cast<int>(u01() * static_cast<double>(n));
    }

    // True with probability p. One draw.
    bool bernoulli(double p) {
        return u01() < p;
    }

  private:
    std::mt19937_64 gen_;
};

inline RngStream substream(std::uint64_t master, Stream stream,
                           std::uint64_t a = 0, std::uint64_t b = 0) {
    return RngStream(substream_seed(master, stream, a, b));
}

}  // namespace nudgerl
