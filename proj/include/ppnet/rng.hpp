#pragma once

#include <cstdint>

namespace ppnet {

// Counter-based PRNG: splitmix64 applied to (seed, counter). Output is
// platform-independent, which keeps generated datasets and parameter
// initialization bit-reproducible everywhere. Algorithm id: "splitmix64-counter".
class Rng {
  public:
    static constexpr const char* kAlgorithm = "splitmix64-counter";

    explicit Rng(uint64_t seed) : seed_(seed), counter_(0) {}

    uint64_t next_u64() {
        uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (++counter_);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    // Derive an independent stream, e.g. one per sequence or per parameter.
    Rng fork(uint64_t stream) const {
        Rng r(seed_ ^ (0x632be59bd9b4e019ULL * (stream + 1)));
        return r;
    }

  private:
    uint64_t seed_;
    uint64_t counter_;
};

}  // namespace ppnet
