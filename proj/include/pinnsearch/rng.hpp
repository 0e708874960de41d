#pragma once

#include <cmath>
#include <cstdint>

namespace pinnsearch {

/// splitmix64 step: advances `state` and returns the next 64-bit output.
/// Fully specified arithmetic, so streams are bit-identical everywhere.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stable mix of a seed and an index into a derived stream seed.
/// Used for per-trial seeds so results are independent of worker schedule.
inline std::uint64_t stable_hash(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ (0x100000001b3ULL * (index + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b >> 17);
}

/// Small deterministic generator. std:: distributions are
/// implementation-defined, so the mappings below are hand-rolled.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        (void)splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one value per call, no cached spare).
    double gauss() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Index in [0, n) drawn from the given probability weights (sum ~ 1).
    int categorical(const double* probs, int n) {
        double u = uniform();
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
            acc += probs[k];
            if (u < acc) return k;
        }
        return n - 1;
    }

private:
    std::uint64_t state_;
};

}  // namespace pinnsearch
