#include "icarus/vru.hpp"

#include <algorithm>
#include <stdexcept>

namespace icarus {

namespace {
constexpr int kMaxDepthFrac = 26;
}

Acc32 optical_depth(Fx16 sigma, Fx16 delta) {
    if (sigma.raw < 0) throw std::domain_error("vru: density must be non-negative");
    if (delta.raw < 0) throw std::domain_error("vru: sample spacing must be non-negative");
    const int product_frac = sigma.fmt.frac_bits + delta.fmt.frac_bits;
    const int frac = std::min(product_frac, kMaxDepthFrac);
    const int64_t depth = shift_round_even(int64_t{sigma.raw} * delta.raw, product_frac - frac);
    const int64_t cutoff = int64_t{-kExpCutoff} << frac;
    if (depth > cutoff) return Acc32{static_cast<int32_t>(-(cutoff + 1)), frac};
    return Acc32{static_cast<int32_t>(-depth), frac};
}

void vru_step(RayAccumulator& acc, const SampleShade& s) {
    const ExpScaled e = cordic_exp_neg_scaled(optical_depth(s.sigma, s.delta));
    int32_t next = 0;
    if (e.mantissa != 0)
        next = static_cast<int32_t>(shift_round_even(int64_t{acc.transmittance} * e.mantissa, kCordicFrac + e.shift));
    const int32_t w = acc.transmittance - next;
    for (int k = 0; k < 3; ++k) acc.color[k] += w * s.color[k];
    acc.transmittance = next;
    if (acc.record_weights) acc.weights.push_back(static_cast<int16_t>(w));
}

std::array<Fx16, 3> resolve_pixel(const RayAccumulator& acc) {
    std::array<Fx16, 3> px;
    for (int k = 0; k < 3; ++k) px[k] = requantize(Acc32{acc.color[k], kColorAccFrac}, kQ1_14);
    return px;
}

CompositeResult composite(std::span<const SampleShade> samples, bool record_weights) {
    RayAccumulator acc;
    acc.record_weights = record_weights;
    if (record_weights) acc.weights.reserve(samples.size());
    for (const SampleShade& s : samples) vru_step(acc, s);
    CompositeResult r;
    r.pixel = resolve_pixel(acc);
    r.weights = std::move(acc.weights);
    r.transmittance = acc.transmittance;
    return r;
}

}  // namespace icarus
