#pragma once

// Fixed-point carriers, rounding/saturation helpers and the CORDIC units
// shared by the positional encoder and the volume renderer.
//
// Every conversion rounds to nearest, ties to even, and saturates; nothing
// in the datapath wraps.

#include <cstdint>

namespace icarus {

/// Layout of a 16-bit two's-complement activation: Q(15-frac).frac.
struct QFormat {
    static constexpr int kTotalBits = 16;
    int frac_bits = 12;

    constexpr double lsb() const { return 1.0 / static_cast<double>(int64_t{1} << frac_bits); }
    constexpr double min_value() const { return -32768.0 * lsb(); }
    constexpr double max_value() const { return 32767.0 * lsb(); }

    friend constexpr bool operator==(QFormat a, QFormat b) = default;
};

inline constexpr QFormat kQ1_14{14};
inline constexpr QFormat kQ3_12{12};

struct Fx16 {
    int16_t raw = 0;
    QFormat fmt{};

    double real() const { return raw * fmt.lsb(); }
};

/// 32-bit accumulator word. The fractional count is free (it is the sum of
/// the operand fractional counts for products).
struct Acc32 {
    int32_t raw = 0;
    int frac_bits = 0;

    double real() const;
};

int16_t saturate16(int64_t v, bool* saturated = nullptr);
int32_t saturate32(int64_t v, bool* saturated = nullptr);

/// Divides by 2^shift with round-half-to-even (shift > 0) or multiplies by
/// 2^-shift (shift <= 0). The left-shift path does not check for overflow;
/// callers saturate afterwards.
int64_t shift_round_even(int64_t v, int shift);

/// Round-to-nearest-even of value * 2^frac_bits, saturated to int16.
/// NaN quantizes to zero; infinities saturate.
Fx16 quantize(double value, QFormat fmt, bool* saturated = nullptr);
double to_real(Fx16 x);

/// Narrows an accumulator to 16 bits. Requires acc.frac_bits >= out.frac_bits.
Fx16 requantize(Acc32 acc, QFormat out_fmt, bool* saturated = nullptr);

/// Same as requantize but also allows widening (out.frac_bits > acc.frac_bits).
Fx16 rescale(Acc32 acc, QFormat out_fmt, bool* saturated = nullptr);

// ---------------------------------------------------------------------------
// CORDIC

inline constexpr int kCordicIterations = 16;
/// Fractional bits of the internal CORDIC datapath.
inline constexpr int kCordicFrac = 30;
/// e^x is flushed to zero below this argument.
inline constexpr int kExpCutoff = -16;

struct SinCos {
    Fx16 sin;  // Q1.14
    Fx16 cos;  // Q1.14
};

/// sin/cos of an angle in radians. The angle may be any 32-bit fixed-point
/// word; it is reduced modulo 2*pi with a Q0.32 reciprocal, folded into
/// [-pi/2, pi/2] and rotated with 16 circular iterations.
SinCos cordic_sincos(Acc32 angle);
SinCos cordic_sincos(Fx16 angle);

/// e^x before the output shift: value = mantissa * 2^-(30 + shift).
/// mantissa is in (2^29, 2^30]; an underflowed result has mantissa 0.
struct ExpScaled {
    int32_t mantissa = 0;
    int shift = 0;

    double real() const;
};

/// e^x for x <= 0 via x = q*ln2 + r, r in (-ln2, 0], hyperbolic CORDIC for
/// e^r and a right shift by |q|. Throws std::domain_error for x > 0.
ExpScaled cordic_exp_neg_scaled(Acc32 x);

/// e^x for x <= 0 in Q1.14; zero for x < -16.
Fx16 cordic_exp_neg(Acc32 x);
Fx16 cordic_exp_neg(Fx16 x);

}  // namespace icarus
