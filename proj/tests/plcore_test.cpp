#include <gtest/gtest.h>

#include <cmath>

#include "icarus/oracle.hpp"
#include "icarus/plcore.hpp"
#include "icarus/quantizer.hpp"
#include "icarus/random.hpp"
#include "icarus/traffic.hpp"

using namespace icarus;

namespace {

struct Fixture {
    FloatModel fm = random_model(small_topology(3, 64, 4, 2), 42, RandomInit{.density_bias = 0.5});
    QuantizedModel qm = quantize_model(fm);
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

std::vector<TaggedSample> random_samples(PlCore& core, Rng& rng, int n, uint32_t ray = 0) {
    std::vector<TaggedSample> v;
    for (int i = 0; i < n; ++i) {
        const Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const Vec3 d = normalize(Vec3{rng.normal(), rng.normal(), rng.normal()});
        v.push_back(core.make_sample(p, d, 0.03, ray, static_cast<uint32_t>(i)));
    }
    return v;
}

}  // namespace

TEST(PlCore, ShadingTracksFloatOracle) {
    const Fixture& f = fixture();
    const FloatModel deq = f.qm.dequantized();
    PlCore core(f.qm);
    Rng rng(21);
    const auto samples = random_samples(core, rng, 100);
    const auto out = core.process_batch(samples);
    for (size_t i = 0; i < samples.size(); ++i) {
        Vec3 p, d;
        for (int k = 0; k < 3; ++k) {
            p[k] = samples[i].position[k].real();
            d[k] = samples[i].direction[k].real();
        }
        const OracleShade ref = oracle_forward(deq, p, d);
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(out[i].color[k] / 16384.0, ref.color[k], 0.02);
        EXPECT_NEAR(out[i].sigma.real(), ref.sigma, 0.05 + 0.02 * ref.sigma);
    }
}

TEST(PlCore, PaddingDoesNotLeakIntoResults) {
    const Fixture& f = fixture();
    Rng rng(22);
    PlCore full(f.qm);
    const auto samples = random_samples(full, rng, kBatchSize);
    const auto a = full.process_batch(samples);
    PlCore single(f.qm);
    for (int i : {0, 17, 127}) {
        const auto b = single.process_batch(std::span(samples).subspan(i, 1));
        EXPECT_EQ(b[0].color, a[i].color);
        EXPECT_EQ(b[0].sigma.raw, a[i].sigma.raw);
    }
    EXPECT_EQ(single.counters().padded_samples, 3u * (kBatchSize - 1));
}

TEST(PlCore, RayPixelsEqualCompositeOfSampleOutputs) {
    const Fixture& f = fixture();
    Rng rng(23);
    PlCore core(f.qm);
    std::vector<TaggedSample> all;
    for (uint32_t r = 0; r < 5; ++r) {
        core.begin_ray(r, 40, Pass::kFine);
        const auto s = random_samples(core, rng, 40, r);
        all.insert(all.end(), s.begin(), s.end());
    }
    PlCore shade_only(f.qm);
    std::vector<SampleOutput> outs;
    for (size_t i = 0; i < all.size(); i += kBatchSize) {
        const auto o = shade_only.process_batch(std::span(all).subspan(i, std::min<size_t>(kBatchSize, all.size() - i)));
        outs.insert(outs.end(), o.begin(), o.end());
    }
    core.run(all);
    const auto done = core.take_finished();
    ASSERT_EQ(done.size(), 5u);
    EXPECT_EQ(core.open_rays(), 0u);
    for (const RayResult& r : done) {
        std::vector<SampleShade> shades;
        for (size_t i = 0; i < all.size(); ++i)
            if (all[i].ray == r.ray) shades.push_back(SampleShade{outs[i].color, outs[i].sigma, all[i].delta});
        const CompositeResult ref = composite(shades);
        for (int k = 0; k < 3; ++k) EXPECT_EQ(r.pixel[k].raw, ref.pixel[k].raw);
        EXPECT_EQ(r.transmittance, ref.transmittance);
        EXPECT_TRUE(r.weights.empty());
    }
    const PerfCounters c = core.counters();
    EXPECT_EQ(c.dram_bytes_in, 200u * kInputBytesPerSample);
    EXPECT_EQ(c.dram_bytes_out, 5u * kPixelBytes);
    EXPECT_EQ(c.pixels, 5u);
    EXPECT_EQ(c.vru_steps, 200u);
    EXPECT_EQ(c.batches, 2u);
    EXPECT_EQ(c.samples + c.padded_samples, 2u * kBatchSize);
    EXPECT_EQ(c.sampler_feedback_bytes, 0u);
}

TEST(PlCore, CoarseRaysReturnWeightsNotPixels) {
    const Fixture& f = fixture();
    Rng rng(24);
    PlCore core(f.qm);
    core.begin_ray(7, 16, Pass::kCoarse);
    core.run(random_samples(core, rng, 16, 7), Pass::kCoarse);
    const auto done = core.take_finished();
    ASSERT_EQ(done.size(), 1u);
    EXPECT_EQ(done[0].pass, Pass::kCoarse);
    EXPECT_EQ(done[0].weights.size(), 16u);
    int64_t sum = done[0].transmittance;
    for (int16_t w : done[0].weights) sum += w;
    EXPECT_EQ(sum, kOneQ14);
    const PerfCounters c = core.counters();
    EXPECT_EQ(c.dram_bytes_out, 0u);
    EXPECT_EQ(c.sampler_feedback_bytes, 32u);
}

TEST(PlCore, ZeroSampleRayFinishesBlack) {
    PlCore core(fixture().qm);
    core.begin_ray(3, 0, Pass::kFine);
    const auto done = core.take_finished();
    ASSERT_EQ(done.size(), 1u);
    for (const Fx16& c : done[0].pixel) EXPECT_EQ(c.raw, 0);
    EXPECT_EQ(core.counters().dram_bytes_out, 6u);
}

TEST(PlCore, RejectsMisuse) {
    const Fixture& f = fixture();
    Rng rng(25);
    PlCore core(f.qm);
    core.begin_ray(1, 3, Pass::kFine);
    EXPECT_THROW(core.begin_ray(1, 3, Pass::kFine), std::invalid_argument);
    EXPECT_THROW(core.begin_ray(2, -1, Pass::kFine), std::invalid_argument);
    auto s = random_samples(core, rng, 3, 1);
    std::swap(s[0], s[1]);
    EXPECT_THROW(core.process_batch(s), std::invalid_argument);

    PlCore other(f.qm);
    EXPECT_THROW(other.process_batch(random_samples(other, rng, kBatchSize + 1)), std::invalid_argument);
    auto bad = random_samples(other, rng, 1);
    bad[0].delta.fmt = kQ1_14;
    EXPECT_THROW(other.process_batch(bad), std::invalid_argument);

    PlCore pass_check(f.qm);
    pass_check.begin_ray(0, 1, Pass::kCoarse);
    EXPECT_THROW(pass_check.process_batch(random_samples(pass_check, rng, 1), Pass::kFine), std::invalid_argument);
}

TEST(PlCore, InputSaturationIsCounted) {
    PlCore core(fixture().qm);
    core.make_sample({100.0, 0, 0}, {0, 0, 1}, 0.01, 0, 0);
    EXPECT_EQ(core.counters().input_saturations, 1u);
}

TEST(PlCore, WeightLoadsScaleWithBatches) {
    const Fixture& f = fixture();
    Rng rng(26);
    PlCore core(f.qm);
    core.run(random_samples(core, rng, 3 * kBatchSize + 5));
    EXPECT_EQ(core.counters().batches, 4u);
    EXPECT_EQ(core.counters().weight_tile_loads, 4u * static_cast<uint64_t>(f.qm.total_weight_tiles()));
}

TEST(PlCore, ApproxModeUsesApproxMultipliers) {
    const Fixture& f = fixture();
    Rng rng(27);
    PlCoreConfig cfg;
    cfg.mode = MultiplierMode::kApprox;
    PlCore core(f.qm, cfg);
    core.run(random_samples(core, rng, 10));
    EXPECT_GT(core.counters().multiplies_approx, 0u);
    EXPECT_EQ(core.counters().multiplies_exact, 0u);
}

TEST(PlCore, CoarseModelServesCoarsePass) {
    const Fixture& f = fixture();
    const QuantizedModel coarse = quantize_model(random_model(small_topology(2, 64, 4, 2), 43));
    PlCoreConfig cfg;
    cfg.coarse_model = &coarse;
    PlCore core(f.qm, cfg);
    EXPECT_EQ(&core.model(Pass::kCoarse), &coarse);
    EXPECT_EQ(&core.model(Pass::kFine), &f.qm);
    Rng rng(28);
    const auto s = random_samples(core, rng, 4);
    const auto a = core.process_batch(s, Pass::kCoarse);
    PlCore direct(coarse);
    const auto b = direct.process_batch(s);
    for (size_t i = 0; i < s.size(); ++i) EXPECT_EQ(a[i].color, b[i].color);
}

TEST(Traffic, FrameFigures) {
    EXPECT_EQ(estimate_traffic(800, 800, 192, true, true).input_bytes, 1474560000u);
    EXPECT_EQ(estimate_traffic(800, 800, 192, false, true).input_bytes, 20643840000u);
    EXPECT_EQ(estimate_traffic(800, 800, 192, true, false).output_bytes, 655360000u);
    EXPECT_EQ(estimate_traffic(800, 800, 192, true, true).output_bytes, 3840000u);
    EXPECT_EQ(format_gib(1474560000u), "1.37 GiB");
    EXPECT_EQ(format_gib(20643840000u), "19.22 GiB");
    EXPECT_EQ(format_mib(655360000u), "625.00 MiB");
    EXPECT_EQ(format_mib(3840000u), "3.66 MiB");
    EXPECT_EQ(with_commas(20643840000u), "20,643,840,000");
    EXPECT_DOUBLE_EQ(vru_value_ratio(128), 3.0 / 512.0);
    EXPECT_THROW(estimate_traffic(0, 800, 192, true, true), std::invalid_argument);
}

TEST(Traffic, TableRows) {
    const auto rows = traffic_table(800, 800, 192);
    ASSERT_GE(rows.size(), 4u);
    for (const TrafficRow& r : rows) EXPECT_FALSE(r.display.empty());
}
