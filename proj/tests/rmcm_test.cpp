#include <gtest/gtest.h>

#include <cstdlib>

#include "icarus/random.hpp"
#include "icarus/rmcm.hpp"

using namespace icarus;

TEST(WeightCode, EncodesSignMagnitude) {
    const WeightCode w = encode_weight(-78);
    EXPECT_EQ(w.sign, 1);
    EXPECT_EQ(w.high, 4);
    EXPECT_EQ(w.low, 14);
    EXPECT_EQ(w.value(), -78);
    EXPECT_EQ(decode_weight(w), -78);
    EXPECT_EQ(encode_weight(255).magnitude(), 255);
    EXPECT_THROW(encode_weight(256), std::out_of_range);
    EXPECT_THROW(encode_weight(-256), std::out_of_range);
}

TEST(WeightCode, BitsRoundTrip) {
    for (int w = -255; w <= 255; ++w) EXPECT_EQ(weight_from_bits(encode_weight(w).bits()).value(), w);
    EXPECT_THROW(weight_from_bits(0x200), std::out_of_range);
    EXPECT_THROW(weight_from_bits(0x100), std::out_of_range);  // -0
}

TEST(Precompute, OddMultiples) {
    const Subexpressions s = precompute(int16_t{-1234});
    EXPECT_EQ(s.x1, -1234);
    EXPECT_EQ(s.x3, -3702);
    EXPECT_EQ(s.x5, -6170);
    EXPECT_EQ(s.x7, -8638);
    EXPECT_FALSE(s.zero_flag);
    const auto t = s.select_table();
    for (int k = 0; k < 9; ++k) EXPECT_EQ(t[k], k == 0 ? 0 : -1234 * (2 * k - 1));
    EXPECT_TRUE(precompute(int16_t{0}).zero_flag);
}

TEST(SsaControl, ApproximateNibbles) {
    EXPECT_EQ(approximate_nibble(9), 10);
    EXPECT_EQ(approximate_nibble(11), 12);
    EXPECT_EQ(approximate_nibble(13), 14);
    EXPECT_EQ(approximate_nibble(15), 14);
    for (int n : {0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14}) EXPECT_EQ(approximate_nibble(n), n);
}

TEST(SsaControl, ApproxNeverSelectsUpperMultiples) {
    for (int w = -255; w <= 255; ++w) {
        const SsaControl c = ssa_control(encode_weight(w), MultiplierMode::kApprox);
        EXPECT_LE(c.high_sel, 4);
        EXPECT_LE(c.low_sel, 4);
    }
}

TEST(Rmcm, ApproxExamples) {
    EXPECT_EQ(approx_multiply(int16_t{3}, encode_weight(9)), 30);
    EXPECT_EQ(approx_multiply(int16_t{1}, encode_weight(255)), 238);
    EXPECT_EQ(approx_multiply(int16_t{-2}, encode_weight(-15)), 28);
    EXPECT_EQ(approx_multiply(int16_t{5}, encode_weight(100)), 500);
}

TEST(Rmcm, ExactMatchesIntegerProductOnRandomOperands) {
    Rng rng(3);
    for (int i = 0; i < 200000; ++i) {
        const auto x = static_cast<int16_t>(rng.next());
        const int w = static_cast<int>(rng.next() % 511) - 255;
        ASSERT_EQ(exact_multiply(x, encode_weight(w)), int32_t{x} * w);
    }
}

TEST(Rmcm, ApproxErrorWithinNinth) {
    Rng rng(4);
    for (int i = 0; i < 200000; ++i) {
        const auto x = static_cast<int16_t>(rng.next());
        const int w = static_cast<int>(rng.next() % 511) - 255;
        const int64_t exact = int64_t{x} * w;
        const int64_t err = std::llabs(approx_multiply(x, encode_weight(w)) - exact);
        ASSERT_LE(err * 9, std::llabs(exact)) << x << " * " << w;
    }
}

TEST(Rmcm, ApproxIsOddSymmetric) {
    for (int w = 0; w <= 255; w += 3)
        for (int x = -1000; x <= 1000; x += 37)
            EXPECT_EQ(approx_multiply(static_cast<int16_t>(x), encode_weight(-w)),
                      -approx_multiply(static_cast<int16_t>(x), encode_weight(w)));
}

TEST(Rmcm, SweepCountsEveryCase) {
    const RmcmSweep s = sweep_rmcm();
    EXPECT_EQ(s.cases, 511ull * 65536ull);
    EXPECT_EQ(s.exact_matches, s.cases);
    EXPECT_EQ(s.bound_violations, 0u);
    EXPECT_EQ(s.worst_err * 9, s.worst_ref);
}
