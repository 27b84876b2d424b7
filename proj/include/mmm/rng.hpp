#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mmm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Mixes a base seed with a stream id so sub-generators (per drug, per
// bootstrap repeat, ...) are independent and reproducible.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

// mt19937_64 is fully specified by the standard; all distributions are
// hand-rolled on top of it so streams are identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0,1).
    double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do { v = eng_(); } while (v >= lim);
        return v % n;
    }

    long range(long lo, long hi) {  // inclusive bounds
        return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double normal() {
        // Box-Muller; one value per call keeps the stream position simple.
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Geometric on {0,1,2,...} with the given mean (mean = (1-p)/p).
    long geometric(double mean) {
        if (mean <= 0.0) return 0;
        double p = 1.0 / (1.0 + mean);
        double u = uniform();
        if (u < 1e-300) u = 1e-300;
        return static_cast<long>(std::floor(std::log(u) / std::log(1.0 - p)));
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace mmm
