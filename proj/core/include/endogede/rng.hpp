#pragma once

#include <cstdint>

namespace endogede {

// Deterministic, platform-independent random generator (splitmix64 core).
// std:: distributions are avoided so that seeded runs are reproducible
// independent of the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Inclusive bounds.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // Standard normal via Box-Muller; one value per call, pair cached.
    double normal();

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    // Derive an independent stream; forking with distinct tags gives
    // decorrelated generators from one master seed.
    Rng fork(std::uint64_t tag) const {
        Rng r(state_ ^ (0x5851f42d4c957f2dULL * (tag + 1)));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

} // namespace endogede
