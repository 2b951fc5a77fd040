#include "icarus/fxp.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace icarus {

namespace {

// atan(2^-i), i = 0..15, Q2.30.
constexpr std::array<int64_t, 16> kAtanQ30 = {
    843314857, 497837829, 263043837, 133525159, 67021687, 33543516, 16775851, 8388437,
    4194283,   2097149,   1048576,   524288,    262144,   131072,   65536,    32768};

// Shift schedule of the hyperbolic rotation: 1..16 with 4 and 13 repeated.
constexpr std::array<int, 18> kHypShift = {1, 2, 3, 4, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 13, 14, 15, 16};

// atanh(2^-i), i = 1..16, Q2.30.
constexpr std::array<int64_t, 17> kAtanhQ30 = {
    0,       589812981, 274247419, 134923406, 67196451, 33565361, 16778582, 8388779, 4194325,
    2097155, 1048576,   524288,    262144,    131072,   65536,    32768,    16384};

// Circular gain over 16 iterations, Q2.30.
constexpr int64_t kCircularGainQ30 = 652032874;
// Reciprocal hyperbolic gain over kHypShift, Q2.30.
constexpr int64_t kInvHyperbolicGainQ30 = 1296540104;
constexpr int64_t kLn2Q30 = 744261118;
constexpr int64_t kInvTwoPiQ32 = 683565276;
constexpr int64_t kTwoPiQ29 = 3373259426;

constexpr int64_t kOneQ30 = int64_t{1} << kCordicFrac;
constexpr int64_t kOneQ14 = 16384;

Fx16 q14(int64_t raw) { return Fx16{static_cast<int16_t>(raw), kQ1_14}; }

}  // namespace

double Acc32::real() const { return std::ldexp(static_cast<double>(raw), -frac_bits); }

double ExpScaled::real() const { return std::ldexp(static_cast<double>(mantissa), -(kCordicFrac + shift)); }

int16_t saturate16(int64_t v, bool* saturated) {
    if (v > std::numeric_limits<int16_t>::max() || v < std::numeric_limits<int16_t>::min()) {
        if (saturated) *saturated = true;
        return v > 0 ? std::numeric_limits<int16_t>::max() : std::numeric_limits<int16_t>::min();
    }
    return static_cast<int16_t>(v);
}

int32_t saturate32(int64_t v, bool* saturated) {
    if (v > std::numeric_limits<int32_t>::max() || v < std::numeric_limits<int32_t>::min()) {
        if (saturated) *saturated = true;
        return v > 0 ? std::numeric_limits<int32_t>::max() : std::numeric_limits<int32_t>::min();
    }
    return static_cast<int32_t>(v);
}

int64_t shift_round_even(int64_t v, int shift) {
    if (shift <= 0) return v * (int64_t{1} << -shift);
    if (shift > 62) return 0;
    const int64_t q = v >> shift;  // floor
    const int64_t rem = v - q * (int64_t{1} << shift);
    const int64_t half = int64_t{1} << (shift - 1);
    if (rem > half || (rem == half && (q & 1) != 0)) return q + 1;
    return q;
}

Fx16 quantize(double value, QFormat fmt, bool* saturated) {
    if (fmt.frac_bits < 0 || fmt.frac_bits > 15)
        throw std::invalid_argument("quantize: frac_bits must be in [0, 15]");
    if (std::isnan(value)) return Fx16{0, fmt};
    const double scaled = std::nearbyint(std::ldexp(value, fmt.frac_bits));
    if (scaled > 32767.0 || scaled < -32768.0) {
        if (saturated) *saturated = true;
        return Fx16{static_cast<int16_t>(scaled > 0 ? 32767 : -32768), fmt};
    }
    return Fx16{static_cast<int16_t>(scaled), fmt};
}

double to_real(Fx16 x) { return x.real(); }

Fx16 requantize(Acc32 acc, QFormat out_fmt, bool* saturated) {
    if (acc.frac_bits < out_fmt.frac_bits)
        throw std::invalid_argument("requantize: accumulator has fewer fractional bits than the output");
    return rescale(acc, out_fmt, saturated);
}

Fx16 rescale(Acc32 acc, QFormat out_fmt, bool* saturated) {
    const int shift = acc.frac_bits - out_fmt.frac_bits;
    int64_t v;
    if (shift < 0 && -shift > 32) {
        v = acc.raw == 0 ? 0 : (acc.raw > 0 ? INT64_MAX : INT64_MIN);
    } else {
        v = shift_round_even(acc.raw, shift);
    }
    return Fx16{saturate16(v, saturated), out_fmt};
}

SinCos cordic_sincos(Acc32 angle) {
    if (angle.frac_bits < 0 || angle.frac_bits > 31)
        throw std::invalid_argument("cordic_sincos: angle frac_bits must be in [0, 31]");

    // Turns in Q0.32; the low 32 bits are the angle modulo one full turn.
    const int64_t turns = shift_round_even(static_cast<int64_t>(angle.raw) * kInvTwoPiQ32, angle.frac_bits);
    int64_t t = static_cast<int32_t>(static_cast<uint32_t>(static_cast<uint64_t>(turns)));

    bool negate_cos = false;
    constexpr int64_t kQuarter = int64_t{1} << 30;
    constexpr int64_t kHalf = int64_t{1} << 31;
    if (t > kQuarter) {
        t = kHalf - t;
        negate_cos = true;
    } else if (t < -kQuarter) {
        t = -kHalf - t;
        negate_cos = true;
    }

    if (t == 0) return SinCos{q14(0), q14(negate_cos ? -kOneQ14 : kOneQ14)};

    int64_t z = shift_round_even(t * kTwoPiQ29, 31);  // radians, Q2.30
    int64_t x = kCircularGainQ30;
    int64_t y = 0;
    for (int i = 0; i < kCordicIterations; ++i) {
        const int64_t dx = y >> i;
        const int64_t dy = x >> i;
        if (z >= 0) {
            x -= dx;
            y += dy;
            z -= kAtanQ30[i];
        } else {
            x += dx;
            y -= dy;
            z += kAtanQ30[i];
        }
    }

    auto to_q14 = [](int64_t v) {
        const int64_t r = shift_round_even(v, kCordicFrac - 14);
        return r > kOneQ14 ? kOneQ14 : (r < -kOneQ14 ? -kOneQ14 : r);
    };
    const int64_t s = to_q14(y);
    const int64_t c = to_q14(x);
    return SinCos{q14(s), q14(negate_cos ? -c : c)};
}

SinCos cordic_sincos(Fx16 angle) { return cordic_sincos(Acc32{angle.raw, angle.fmt.frac_bits}); }

ExpScaled cordic_exp_neg_scaled(Acc32 x) {
    if (x.raw > 0) throw std::domain_error("cordic_exp_neg: argument must be <= 0");
    if (x.raw == 0) return ExpScaled{static_cast<int32_t>(kOneQ30), 0};

    int64_t x30;
    const int shift_in = x.frac_bits - kCordicFrac;
    if (shift_in < -31) {
        return ExpScaled{};  // |x| >= 2^31 * 2^-frac with frac tiny: far below the cutoff
    }
    x30 = shift_round_even(x.raw, shift_in);
    if (x30 < int64_t{kExpCutoff} * kOneQ30) return ExpScaled{};

    // Truncating division rounds toward zero, i.e. ceil for x30 < 0, so r is in (-ln2, 0].
    const int64_t q = x30 / kLn2Q30;
    const int64_t r = x30 - q * kLn2Q30;
    if (r == 0) return ExpScaled{static_cast<int32_t>(kOneQ30), static_cast<int>(-q)};

    int64_t cx = kInvHyperbolicGainQ30;
    int64_t cy = 0;
    int64_t z = r;
    for (int i : kHypShift) {
        const int64_t dx = cy >> i;
        const int64_t dy = cx >> i;
        if (z >= 0) {
            cx += dx;
            cy += dy;
            z -= kAtanhQ30[i];
        } else {
            cx -= dx;
            cy -= dy;
            z += kAtanhQ30[i];
        }
    }
    int64_t m = cx + cy;
    if (m > kOneQ30) m = kOneQ30;
    if (m < 1) m = 1;
    return ExpScaled{static_cast<int32_t>(m), static_cast<int>(-q)};
}

Fx16 cordic_exp_neg(Acc32 x) {
    const ExpScaled e = cordic_exp_neg_scaled(x);
    if (e.mantissa == 0) return q14(0);
    return q14(shift_round_even(e.mantissa, kCordicFrac - 14 + e.shift));
}

Fx16 cordic_exp_neg(Fx16 x) { return cordic_exp_neg(Acc32{x.raw, x.fmt.frac_bits}); }

}  // namespace icarus
