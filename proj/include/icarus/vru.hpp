#pragma once

// Volume rendering unit.
//
//   C(r) = sum_i (T_i - T_{i+1}) c_i,   T_{i+1} = T_i * exp(-sigma_i * delta_i)
//
// T is held in Q1.14, the colour accumulator in Q.28 (the exact product of
// two Q1.14 words), so the only rounding per step is the T update.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "icarus/fxp.hpp"

namespace icarus {

inline constexpr int kColorAccFrac = 28;
inline constexpr int32_t kOneQ14 = 16384;

struct SampleShade {
    std::array<int16_t, 3> color{};  // Q1.14
    Fx16 sigma{};                    // >= 0, already rectified
    Fx16 delta{};                    // > 0
};

struct RayAccumulator {
    int32_t transmittance = kOneQ14;  // Q1.14
    std::array<int32_t, 3> color{};   // Q.28
    bool record_weights = false;
    std::vector<int16_t> weights;     // T_i - T_{i+1}, Q1.14
};

/// x = -sigma * delta as an accumulator word, clamped just below the exp
/// cutoff. Throws std::domain_error for negative sigma or delta.
Acc32 optical_depth(Fx16 sigma, Fx16 delta);

void vru_step(RayAccumulator& acc, const SampleShade& s);

struct CompositeResult {
    std::array<Fx16, 3> pixel{Fx16{0, kQ1_14}, Fx16{0, kQ1_14}, Fx16{0, kQ1_14}};
    std::vector<int16_t> weights;
    int32_t transmittance = kOneQ14;
};

/// Front-to-back fold of vru_step; an empty list yields black with T = 1.
CompositeResult composite(std::span<const SampleShade> samples, bool record_weights = true);

std::array<Fx16, 3> resolve_pixel(const RayAccumulator& acc);

}  // namespace icarus
