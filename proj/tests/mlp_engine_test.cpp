#include <gtest/gtest.h>

#include <cmath>

#include "icarus/mlp_engine.hpp"
#include "icarus/random.hpp"

using namespace icarus;

namespace {

LayerSpec random_layer(Rng& rng, int in, int out, Activation act, BlockKind block = BlockKind::kMonb) {
    std::vector<int> w(static_cast<size_t>(in) * out);
    for (int& v : w) v = static_cast<int>(rng.next() % 511) - 255;
    std::vector<int32_t> b(out);
    for (int32_t& v : b) v = static_cast<int32_t>(rng.next() % 20001) - 10000;
    return make_layer(block, in, out, w, b, act, 12, 8, act == Activation::kSigmoid ? 14 : 12);
}

ActivationBatch random_batch(Rng& rng, int width, int samples, QFormat fmt, Residency r) {
    ActivationBatch x(width, samples, fmt, r);
    for (int16_t& v : x.data) v = static_cast<int16_t>(static_cast<int>(rng.next() % 8193) - 4096);
    return x;
}

// Straight dot product over logical columns, then the shared act_quant.
int16_t reference_output(const LayerSpec& l, std::span<const int16_t> in, int row) {
    int64_t acc = 0;
    for (int c = 0; c < l.in_width; ++c) acc += int64_t{in[c]} * l.weight(row, c).value();
    return act_quant(Acc32{saturate32(acc), l.acc_frac()}, Acc32{l.bias[row], l.acc_frac()}, l.activation,
                     QFormat{l.out_frac})
        .raw;
}

}  // namespace

TEST(Sigmoid, TracksLogisticFunction) {
    for (int k = -1200; k <= 1200; ++k) {
        const double x = k / 100.0;
        const double got = sigmoid_pwl(Acc32{static_cast<int32_t>(std::lround(x * 4096)), 12}) / 16384.0;
        EXPECT_NEAR(got, 1.0 / (1.0 + std::exp(-x)), 2e-3) << x;
    }
}

TEST(Sigmoid, MonotoneAndClamped) {
    int prev = -1;
    for (int raw = -(20 << 10); raw <= (20 << 10); raw += 13) {
        const int v = sigmoid_pwl(Acc32{raw, 10});
        EXPECT_GE(v, prev);
        EXPECT_GE(v, 0);
        EXPECT_LE(v, 16384);
        prev = v;
    }
    EXPECT_EQ(sigmoid_pwl(Acc32{0, 20}), 8192);
}

TEST(ActQuant, ReluNoneSigmoid) {
    const Acc32 zero{0, 20};
    EXPECT_EQ(act_quant(Acc32{-5 << 20, 20}, zero, Activation::kRelu, kQ3_12).raw, 0);
    EXPECT_EQ(act_quant(Acc32{-5 << 20, 20}, Acc32{1 << 20, 20}, Activation::kNone, kQ3_12).raw, -4 * 4096);
    EXPECT_EQ(act_quant(Acc32{0, 20}, zero, Activation::kSigmoid, kQ1_14).raw, 8192);
    bool sat = false;
    EXPECT_EQ(act_quant(Acc32{100 << 20, 20}, zero, Activation::kRelu, kQ3_12, &sat).raw, 32767);
    EXPECT_TRUE(sat);
    EXPECT_THROW(act_quant(Acc32{0, 20}, Acc32{0, 19}, Activation::kNone, kQ3_12), std::invalid_argument);
}

TEST(MakeLayer, PadsToTiles) {
    Rng rng(8);
    const LayerSpec l = random_layer(rng, 70, 100, Activation::kRelu);
    EXPECT_EQ(l.in_padded(), 128);
    EXPECT_EQ(l.rows(), 128);
    EXPECT_EQ(l.tile_count(), 4);
    for (int r = 0; r < l.rows(); ++r)
        for (int c = 0; c < l.in_padded(); ++c)
            if (r >= 100 || c >= 70) EXPECT_EQ(l.weight(r, c).value(), 0);
    const std::vector<int> w(6, 1);
    EXPECT_THROW(make_layer(BlockKind::kMonb, 3, 3, w, std::vector<int32_t>(3), Activation::kRelu, 12, 8, 12),
                 std::invalid_argument);
}

TEST(TileMvm, MatchesDotProducts) {
    Rng rng(9);
    WeightTile tile;
    for (auto& w : tile) w = encode_weight(static_cast<int>(rng.next() % 511) - 255);
    std::vector<int16_t> x(3 * kTileSize);
    for (auto& v : x) v = static_cast<int16_t>(rng.next());
    EngineCounters c;
    const auto out = tile_mvm(tile, x, 3, MultiplierMode::kExact, &c);
    for (int s = 0; s < 3; ++s)
        for (int r = 0; r < kTileSize; ++r) {
            int64_t ref = 0;
            for (int col = 0; col < kTileSize; ++col) ref += int64_t{x[s * kTileSize + col]} * tile[r * kTileSize + col].value();
            EXPECT_EQ(out[s * kTileSize + r], ref);
        }
    EXPECT_EQ(c.multiplies_exact + c.zero_gated_products, 3u * 64 * 64);
}

TEST(TileMvm, ZeroActivationsAreGated) {
    WeightTile tile;
    tile.fill(encode_weight(7));
    std::vector<int16_t> x(kTileSize, 0);
    x[5] = 3;
    EngineCounters c;
    const auto out = tile_mvm(tile, x, 1, MultiplierMode::kApprox, &c);
    EXPECT_EQ(out[0], 21);
    EXPECT_EQ(c.zero_gated_products, 63u * 64);
    EXPECT_EQ(c.multiplies_approx, 64u);
}

TEST(LayerForward, TilingIsTransparent) {
    Rng rng(10);
    for (int in : {64, 100, 256, 316}) {
        for (int out : {3, 64, 128, 200}) {
            for (Activation act : {Activation::kRelu, Activation::kNone, Activation::kSigmoid}) {
                const LayerSpec l = random_layer(rng, in, out, act);
                const ActivationBatch x = random_batch(rng, in, 17, kQ3_12, Residency::kActMem2);
                MlpEngine e;
                const ActivationBatch y = e.layer_forward(l, x);
                for (int s = 0; s < x.samples; ++s)
                    for (int r = 0; r < out; ++r) ASSERT_EQ(y.at(s, r), reference_output(l, x.row(s), r));
            }
        }
    }
}

TEST(LayerForward, SkipIsAppendedAfterPrimaryInput) {
    Rng rng(11);
    const LayerSpec l = random_layer(rng, 100 + 60, 64, Activation::kNone);
    const ActivationBatch x = random_batch(rng, 100, 5, kQ3_12, Residency::kActMem1);
    const ActivationBatch skip = random_batch(rng, 60, 5, kQ3_12, Residency::kInputMemory);
    MlpEngine e;
    const ActivationBatch y = e.layer_forward(l, x, &skip);
    for (int s = 0; s < 5; ++s) {
        std::vector<int16_t> joined(x.row(s).begin(), x.row(s).end());
        joined.insert(joined.end(), skip.row(s).begin(), skip.row(s).end());
        for (int r = 0; r < 64; ++r) EXPECT_EQ(y.at(s, r), reference_output(l, joined, r));
    }
    EXPECT_THROW(e.layer_forward(l, x), std::invalid_argument);
}

TEST(LayerForward, InputFormatConversion) {
    Rng rng(12);
    const LayerSpec l = random_layer(rng, 64, 64, Activation::kRelu);  // in_frac 12
    ActivationBatch x = random_batch(rng, 64, 4, kQ1_14, Residency::kInputMemory);
    MlpEngine e;
    const ActivationBatch y = e.layer_forward(l, x);
    for (int s = 0; s < 4; ++s) {
        std::vector<int16_t> conv(64);
        for (int c = 0; c < 64; ++c) conv[c] = static_cast<int16_t>(shift_round_even(x.at(s, c), 2));
        for (int r = 0; r < 64; ++r) EXPECT_EQ(y.at(s, r), reference_output(l, conv, r));
    }
}

TEST(LayerForward, PingPongResidency) {
    Rng rng(13);
    std::vector<LayerSpec> layers;
    for (int i = 0; i < 4; ++i) layers.push_back(random_layer(rng, 64, 64, Activation::kRelu));
    MlpEngine e;
    ActivationBatch h = random_batch(rng, 64, 8, kQ3_12, Residency::kInputMemory);
    const Residency expect[] = {Residency::kActMem1, Residency::kActMem2, Residency::kActMem1, Residency::kActMem2};
    for (int i = 0; i < 4; ++i) {
        const Residency before = h.residency;
        h = e.layer_forward(layers[i], h);
        EXPECT_EQ(h.residency, expect[i]);
        EXPECT_NE(h.residency, before);
    }
    const auto& trace = e.residency_trace();
    ASSERT_EQ(trace.size(), 8u);
    for (size_t i = 0; i < trace.size(); i += 2) EXPECT_NE(trace[i], trace[i + 1]);
}

TEST(LayerForward, OneLoadPerTilePerBatch) {
    Rng rng(14);
    const LayerSpec l = random_layer(rng, 256, 192, Activation::kRelu);
    MlpEngine e;
    const ActivationBatch x = random_batch(rng, 256, kBatchSize, kQ3_12, Residency::kActMem1);
    e.layer_forward(l, x);
    e.layer_forward(l, x);
    const auto loads = e.tile_loads(l);
    ASSERT_EQ(loads.size(), 12u);
    for (uint64_t v : loads) EXPECT_EQ(v, 2u);
    EXPECT_EQ(e.counters().weight_tile_loads, 24u);
    EXPECT_EQ(e.counters().act_mem_reads, 2u * 3 * 256 * kBatchSize);  // each tile row streams the inputs
    EXPECT_EQ(e.counters().act_mem_writes, 2u * 192 * kBatchSize);
}

TEST(LayerForward, RejectsOversizeBatch) {
    Rng rng(15);
    const LayerSpec l = random_layer(rng, 64, 64, Activation::kRelu);
    MlpEngine e(MultiplierMode::kExact, 4);
    EXPECT_THROW(e.layer_forward(l, random_batch(rng, 64, 5, kQ3_12, Residency::kActMem1)), std::invalid_argument);
    EXPECT_THROW(MlpEngine(MultiplierMode::kExact, 0), std::invalid_argument);
}

TEST(LayerForward, AccumulatorSaturatesOnce) {
    // Every product at its maximum: 320 * 32767 * 255 overflows 32 bits
    // only in the final sum.
    const int in = 320;
    std::vector<int> w(static_cast<size_t>(in) * 64, 255);
    const LayerSpec l = make_layer(BlockKind::kMonb, in, 64, w, std::vector<int32_t>(64, 0), Activation::kNone, 12, 8, 8);
    ActivationBatch x(in, 1, kQ3_12, Residency::kActMem1);
    std::fill(x.data.begin(), x.data.end(), int16_t{32767});
    MlpEngine e;
    const ActivationBatch y = e.layer_forward(l, x);
    EXPECT_EQ(y.at(0, 0), 32767);
    EXPECT_EQ(e.counters().accumulator_saturations, 64u);
}

TEST(Sonb, HeadMatchesDotProduct) {
    Rng rng(16);
    const LayerSpec head = random_layer(rng, 128, 3, Activation::kSigmoid, BlockKind::kSonb);
    EXPECT_EQ(head.rows(), 3);
    EXPECT_EQ(head.tile_count(), 2);
    const ActivationBatch x = random_batch(rng, 128, 9, kQ3_12, Residency::kActMem2);
    MlpEngine e(MultiplierMode::kApprox);
    const std::vector<Fx16> y = e.head_forward(head, x);
    ASSERT_EQ(y.size(), 27u);
    for (int s = 0; s < 9; ++s)
        for (int r = 0; r < 3; ++r) EXPECT_EQ(y[s * 3 + r].raw, reference_output(head, x.row(s), r));
    EXPECT_EQ(e.counters().multiplies_approx, 0u);
    EXPECT_GT(e.counters().sonb_multiplies, 0u);
    EXPECT_THROW(e.layer_forward(head, x), std::invalid_argument);
}
