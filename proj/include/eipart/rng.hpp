// rng.hpp -- the seeded random stream used wherever the library draws numbers.
//
// std::mt19937_64 is fully specified by the C++ standard, so a seed produces
// the same sequence on every platform. Doubles are derived from the top 53
// bits directly instead of going through std::uniform_real_distribution,
// whose algorithm is implementation-defined and would break reproducibility.
#pragma once

#include <cstdint>
#include <random>

namespace eipart {

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) { return n ? engine_() % n : 0; }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

}  // namespace eipart
