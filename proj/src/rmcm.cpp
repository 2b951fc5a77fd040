#include "icarus/rmcm.hpp"

#include <bit>
#include <stdexcept>
#include <string>
#include <vector>

namespace icarus {

namespace {

struct NibbleSelect {
    uint8_t sel;
    uint8_t shift;
};

// nibble = odd << shift, sel = (odd + 1) / 2.
NibbleSelect decompose(int nibble) {
    if (nibble == 0) return {0, 0};
    const int shift = std::countr_zero(static_cast<unsigned>(nibble));
    const int odd = nibble >> shift;
    return {static_cast<uint8_t>((odd + 1) / 2), static_cast<uint8_t>(shift)};
}

}  // namespace

const char* to_string(MultiplierMode mode) { return mode == MultiplierMode::kExact ? "exact" : "approx"; }

WeightCode encode_weight(int w) {
    if (w < -255 || w > 255) throw std::out_of_range("encode_weight: |w| must be <= 255, got " + std::to_string(w));
    const int mag = w < 0 ? -w : w;
    return WeightCode{static_cast<uint8_t>(w < 0 ? 1 : 0), static_cast<uint8_t>(mag >> 4),
                      static_cast<uint8_t>(mag & 0xF)};
}

int decode_weight(WeightCode w) { return w.value(); }

WeightCode weight_from_bits(int16_t bits) {
    if (bits & ~0x1FF) throw std::out_of_range("weight_from_bits: stray bits above bit 8");
    const WeightCode w{static_cast<uint8_t>((bits >> 8) & 1), static_cast<uint8_t>((bits >> 4) & 0xF),
                       static_cast<uint8_t>(bits & 0xF)};
    if (w.sign && w.magnitude() == 0) throw std::out_of_range("weight_from_bits: negative zero");
    return w;
}

std::array<int32_t, 9> Subexpressions::select_table() const {
    const int32_t x8 = x1 * 8;
    return {0, x1, x3, x5, x7, x8 + x1, x8 + x3, x8 + x5, x8 + x7};
}

Subexpressions precompute(int16_t x) {
    const int32_t x1 = x;
    Subexpressions s;
    s.zero_flag = x1 == 0;
    s.x1 = x1;
    s.x3 = x1 * 2 + x1;
    s.x5 = x1 * 4 + x1;
    s.x7 = x1 * 8 - x1;
    return s;
}

int approximate_nibble(int nibble) {
    switch (nibble) {
        case 9: return 10;
        case 11: return 12;
        case 13: return 14;
        case 15: return 14;
        default: return nibble;
    }
}

SsaControl ssa_control(WeightCode w, MultiplierMode mode) {
    int high = w.high;
    int low = w.low;
    if (mode == MultiplierMode::kApprox) {
        high = approximate_nibble(high);
        low = approximate_nibble(low);
    }
    const NibbleSelect h = decompose(high);
    const NibbleSelect l = decompose(low);
    return SsaControl{h.sel, h.shift, l.sel, l.shift, w.sign != 0};
}

int32_t rmcm_multiply(int16_t x, WeightCode w, MultiplierMode mode) {
    const Subexpressions s = precompute(x);
    if (s.zero_flag) return 0;
    return ssa_product(s.select_table(), ssa_control(w, mode));
}

int32_t exact_multiply(int16_t x, WeightCode w) { return rmcm_multiply(x, w, MultiplierMode::kExact); }

int32_t approx_multiply(int16_t x, WeightCode w) { return rmcm_multiply(x, w, MultiplierMode::kApprox); }

RmcmSweep sweep_rmcm() {
    std::vector<WeightCode> weights;
    std::vector<SsaControl> exact_ctrl, approx_ctrl;
    // All 9-bit words except +0; the sign-only word (-0) is included and must give 0.
    for (int bits = 1; bits < 512; ++bits) {
        weights.push_back(WeightCode{static_cast<uint8_t>(bits >> 8), static_cast<uint8_t>((bits >> 4) & 15),
                                     static_cast<uint8_t>(bits & 15)});
        exact_ctrl.push_back(ssa_control(weights.back(), MultiplierMode::kExact));
        approx_ctrl.push_back(ssa_control(weights.back(), MultiplierMode::kApprox));
    }
    RmcmSweep r;
    for (int x = -32768; x <= 32767; ++x) {
        const std::array<int32_t, 9> table = precompute(static_cast<int16_t>(x)).select_table();
        for (size_t i = 0; i < weights.size(); ++i) {
            const int64_t ref = int64_t{x} * weights[i].value();
            const int64_t e = ssa_product(table, exact_ctrl[i]);
            const int64_t a = ssa_product(table, approx_ctrl[i]);
            r.cases += 1;
            r.exact_matches += e == ref;
            const int64_t err = a > ref ? a - ref : ref - a;
            const int64_t mag = ref < 0 ? -ref : ref;
            if (err > (mag + 8) / 9) r.bound_violations += 1;
            if (mag != 0 && err * r.worst_ref > r.worst_err * mag) {
                r.worst_err = err;
                r.worst_ref = mag;
                r.worst_x = x;
                r.worst_w = weights[i].value();
            }
        }
    }
    return r;
}

}  // namespace icarus
