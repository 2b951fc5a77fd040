#pragma once

// Reproducible random numbers.
//
// Generator: std::mt19937_64 (fully specified by the standard). Uniform
// doubles take the top 53 bits of one draw: u = (x >> 11) * 2^-53, so
// u is in [0, 1). Normals use Box-Muller on two uniforms. None of the
// implementation-defined <random> distributions are used, so sequences
// match across standard libraries.

#include <cstdint>
#include <random>

namespace icarus {

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    /// Independent stream for item `index` of a seeded job (e.g. one ray).
    static Rng for_stream(uint64_t seed, uint64_t index);

    uint64_t next() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();

private:
    std::mt19937_64 engine_;
};

}  // namespace icarus
