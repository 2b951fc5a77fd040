#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "icarus/fxp.hpp"
#include "icarus/random.hpp"

using namespace icarus;

TEST(Quantize, RoundsToNearest) {
    EXPECT_EQ(quantize(123.456, QFormat{8}).raw, 31605);
    EXPECT_EQ(quantize(-1.0, kQ1_14).raw, -16384);
    EXPECT_EQ(quantize(0.25, kQ3_12).raw, 1024);
}

TEST(Quantize, TiesGoToEven) {
    // 0.5 and 1.5 LSB.
    EXPECT_EQ(quantize(0.5 / 4096, kQ3_12).raw, 0);
    EXPECT_EQ(quantize(1.5 / 4096, kQ3_12).raw, 2);
    EXPECT_EQ(quantize(-2.5 / 4096, kQ3_12).raw, -2);
}

TEST(Quantize, SaturatesAndFlags) {
    bool sat = false;
    EXPECT_EQ(quantize(8.0, kQ3_12, &sat).raw, 32767);
    EXPECT_TRUE(sat);
    sat = false;
    EXPECT_EQ(quantize(-8.0, kQ3_12, &sat).raw, -32768);
    EXPECT_FALSE(sat);
    EXPECT_EQ(quantize(-1e9, kQ3_12, &sat).raw, -32768);
    EXPECT_TRUE(sat);
    EXPECT_EQ(quantize(INFINITY, kQ1_14).raw, 32767);
    EXPECT_EQ(quantize(NAN, kQ1_14).raw, 0);
}

TEST(Quantize, RejectsBadFormat) {
    EXPECT_THROW(quantize(1.0, QFormat{16}), std::invalid_argument);
    EXPECT_THROW(quantize(1.0, QFormat{-1}), std::invalid_argument);
}

TEST(Quantize, ErrorWithinHalfLsb) {
    Rng rng(1);
    for (int i = 0; i < 20000; ++i) {
        const int frac = static_cast<int>(rng.next() % 16);
        const QFormat f{frac};
        const double v = rng.uniform(f.min_value(), f.max_value());
        EXPECT_LE(std::abs(quantize(v, f).real() - v), 0.5 * f.lsb());
    }
}

TEST(ShiftRoundEven, MatchesRealDivision) {
    Rng rng(2);
    for (int i = 0; i < 20000; ++i) {
        const int64_t v = static_cast<int64_t>(rng.next() % 2000001) - 1000000;
        const int shift = 1 + static_cast<int>(rng.next() % 12);
        const long double q = static_cast<long double>(v) / (1LL << shift);
        const long double fl = std::floor(q);
        int64_t expect = static_cast<int64_t>(fl);
        const long double frac = q - fl;
        if (frac > 0.5L || (frac == 0.5L && (expect & 1))) ++expect;
        ASSERT_EQ(shift_round_even(v, shift), expect) << v << " >> " << shift;
    }
    EXPECT_EQ(shift_round_even(3, -2), 12);
}

TEST(Requantize, NarrowsWithRoundingAndSaturation) {
    EXPECT_EQ(requantize(Acc32{6, 2}, QFormat{0}).raw, 2);  // 1.5 -> 2
    EXPECT_EQ(requantize(Acc32{10, 2}, QFormat{0}).raw, 2);  // 2.5 -> 2
    bool sat = false;
    EXPECT_EQ(requantize(Acc32{1 << 20, 4}, QFormat{0}, &sat).raw, 32767);
    EXPECT_TRUE(sat);
    EXPECT_THROW(requantize(Acc32{1, 2}, QFormat{4}), std::invalid_argument);
    EXPECT_EQ(rescale(Acc32{3, 2}, QFormat{4}).raw, 12);
}

TEST(Saturate, Bounds) {
    EXPECT_EQ(saturate16(40000), 32767);
    EXPECT_EQ(saturate16(-40000), -32768);
    EXPECT_EQ(saturate32(int64_t{1} << 40), INT32_MAX);
    EXPECT_EQ(saturate32(-(int64_t{1} << 40)), INT32_MIN);
    EXPECT_EQ(saturate32(-5), -5);
}

TEST(Cordic, SinCosNearReference) {
    for (int k = -400; k <= 400; ++k) {
        const double t = k * 0.01;
        const SinCos sc = cordic_sincos(quantize(t, kQ3_12));
        const double tq = quantize(t, kQ3_12).real();
        EXPECT_NEAR(sc.sin.real(), std::sin(tq), std::ldexp(1.0, -12)) << t;
        EXPECT_NEAR(sc.cos.real(), std::cos(tq), std::ldexp(1.0, -12)) << t;
    }
}

TEST(Cordic, LargeAnglesReduce) {
    const int frac = 16;
    for (double t : {100.0, -250.5, 1000.0 * std::numbers::pi + 0.3}) {
        const Acc32 a{static_cast<int32_t>(std::llround(std::ldexp(t, frac))), frac};
        const SinCos sc = cordic_sincos(a);
        EXPECT_NEAR(sc.sin.real(), std::sin(a.real()), std::ldexp(1.0, -12));
        EXPECT_NEAR(sc.cos.real(), std::cos(a.real()), std::ldexp(1.0, -12));
    }
}

TEST(Cordic, ExpOfZeroIsOne) {
    const Fx16 e = cordic_exp_neg(Acc32{0, 12});
    EXPECT_NEAR(e.real(), 1.0, std::ldexp(1.0, -14));
}

TEST(Cordic, ExpRelativeError) {
    for (int k = 0; k <= 1600; ++k) {
        const Acc32 x{-k * (1 << 14) / 100, 14};
        const double ref = std::exp(x.real());
        EXPECT_LE(std::abs(cordic_exp_neg_scaled(x).real() - ref), std::ldexp(ref, -10)) << x.real();
    }
}

TEST(Cordic, ExpCutoffAndDomain) {
    EXPECT_EQ(cordic_exp_neg(Acc32{-17 << 12, 12}).raw, 0);
    EXPECT_EQ(cordic_exp_neg_scaled(Acc32{-17 << 12, 12}).mantissa, 0);
    EXPECT_THROW(cordic_exp_neg_scaled(Acc32{1, 12}), std::domain_error);
}

TEST(Cordic, ExpIsMonotone) {
    int prev = 32767;
    for (int raw = 0; raw >= -(16 << 10); raw -= 7) {
        const int v = cordic_exp_neg(Acc32{raw, 10}).raw;
        EXPECT_LE(v, prev);
        prev = v;
    }
}
