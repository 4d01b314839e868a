#pragma once

#include <cmath>
#include <cstdint>

namespace airdisrupt {

// splitmix64 step; also used as the counter scheme for deriving worker
// seeds (per tree, per restart, per day) from one master seed.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// mix(seed, counter): stateless derivation so parallel workers can be
// seeded independently of scheduling order.
inline uint64_t derive_seed(uint64_t master, uint64_t counter) {
    uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (counter + 1));
    splitmix64(s);
    return splitmix64(s);
}

// xoshiro256** with hand-rolled distributions. All draws are pinned to
// explicit bit-level formulas so output never depends on the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53-bit resolution.
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0,1); used where log() is applied.
    double uniform01_open() {
        return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Modulo bias is irrelevant at the n we use.
    uint64_t uniform_index(uint64_t n) { return n <= 1 ? 0 : next_u64() % n; }

    bool bernoulli(double p) { return uniform01() < p; }

    double exponential(double mean) { return -mean * std::log(uniform01_open()); }

    // Box-Muller; second value discarded to keep draw order simple.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform01_open();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586 * u2);
    }

    // Knuth multiplication method; fine for the small means used here.
    int poisson(double mean) {
        double l = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > l);
        return k - 1;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
};

}  // namespace airdisrupt
