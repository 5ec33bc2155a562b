#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cr {

// Deterministic RNG wrapper. std::*_distribution output is
// implementation-defined, so uniform/normal draws are generated here from
// raw mt19937_64 words; results are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    // Substream constructor: (seed, index) hashed together so per-sample
    // streams are independent of evaluation order.
    Rng(std::uint64_t seed, std::uint64_t index)
        : gen_(splitmix(splitmix(seed) ^ (index + 0x9e3779b97f4a7c15ULL))) {}

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one spare cached.
    double normal(double mean = 0.0, double stddev = 1.0);

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

    // Fisher-Yates in-place shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cr
