#pragma once

// Reconfigurable multiple-constant multiplication (RMCM).
//
// A 9-bit signed-magnitude weight is split into two nibbles. Each nonzero
// nibble is an odd multiple of the activation shifted left, so a product is
// assembled from a small set of precomputed odd multiples (the pre-compute
// module, PCM) with two muxes, two shifters and one adder (the select &
// shift-add block, SSA). The approximate variant drops the 9x..15x
// multiples and substitutes a representable neighbour.

#include <array>
#include <cstdint>

#include "icarus/fxp.hpp"

namespace icarus {

enum class MultiplierMode { kExact, kApprox };

const char* to_string(MultiplierMode mode);

struct WeightCode {
    uint8_t sign = 0;
    uint8_t high = 0;  // magnitude bits 7..4
    uint8_t low = 0;   // magnitude bits 3..0

    constexpr int magnitude() const { return high * 16 + low; }
    constexpr int value() const { return sign ? -magnitude() : magnitude(); }

    /// 9-bit container word: sign in bit 8, magnitude in bits 7..0.
    constexpr int16_t bits() const { return static_cast<int16_t>((sign << 8) | magnitude()); }

    friend constexpr bool operator==(WeightCode, WeightCode) = default;
};

/// Throws std::out_of_range when |w| > 255.
WeightCode encode_weight(int w);
int decode_weight(WeightCode w);
/// Inverse of WeightCode::bits(); throws std::out_of_range for stray bits or -0.
WeightCode weight_from_bits(int16_t bits);

/// Odd multiples of one activation shared by a column of SSA blocks.
struct Subexpressions {
    int32_t x1 = 0;
    int32_t x3 = 0;
    int32_t x5 = 0;
    int32_t x7 = 0;
    bool zero_flag = false;

    /// The eight-entry selection table used by the exact SSA:
    /// {0, 1x, 3x, 5x, 7x, 9x, 11x, 13x, 15x}. The upper four are one
    /// additional shift-add each from the shared four.
    std::array<int32_t, 9> select_table() const;
};

Subexpressions precompute(int16_t x);
inline Subexpressions precompute(Fx16 x) { return precompute(x.raw); }

/// Mux/shift settings an SSA block derives from one weight. Index 0 selects
/// zero, index k in 1..8 selects the odd multiple 2k-1.
struct SsaControl {
    uint8_t high_sel = 0;
    uint8_t high_shift = 0;
    uint8_t low_sel = 0;
    uint8_t low_shift = 0;
    bool negative = false;
};

/// Decodes a weight into SSA settings; in approximate mode the nibbles
/// 9, 11, 13, 15 become 10, 12, 14, 14.
SsaControl ssa_control(WeightCode w, MultiplierMode mode);

/// Nibble value after the approximate mapping (identity for exact mode).
int approximate_nibble(int nibble);

inline int32_t ssa_product(const std::array<int32_t, 9>& table, SsaControl c) {
    const int32_t high = table[c.high_sel] * (int32_t{1} << (c.high_shift + 4));
    const int32_t low = table[c.low_sel] * (int32_t{1} << c.low_shift);
    const int32_t p = high + low;
    return c.negative ? -p : p;
}

int32_t exact_multiply(int16_t x, WeightCode w);
int32_t approx_multiply(int16_t x, WeightCode w);
int32_t rmcm_multiply(int16_t x, WeightCode w, MultiplierMode mode);

inline int32_t exact_multiply(Fx16 x, WeightCode w) { return exact_multiply(x.raw, w); }
inline int32_t approx_multiply(Fx16 x, WeightCode w) { return approx_multiply(x.raw, w); }

/// Every 9-bit weight word other than +0 (511 of them) against every 16-bit
/// activation.
struct RmcmSweep {
    uint64_t cases = 0;
    uint64_t exact_matches = 0;
    uint64_t bound_violations = 0;  // |approx - exact| > ceil(|exact| / 9)
    int64_t worst_err = 0;          // largest |approx - exact| / |exact| as a fraction
    int64_t worst_ref = 1;
    int worst_x = 0;
    int worst_w = 0;
};

RmcmSweep sweep_rmcm();

}  // namespace icarus
