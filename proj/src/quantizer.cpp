#include "icarus/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace icarus {

int weight_frac_for(double max_abs) {
    if (max_abs == 0.0) return kZeroLayerWeightFrac;
    int f = 24;
    while (f > -16 && max_abs * std::ldexp(1.0, f) > 255.0) --f;
    return f;
}

int activation_frac_for(double max_abs) {
    int f = 15;
    while (f > 0 && std::nearbyint(max_abs * std::ldexp(1.0, f)) > 32767.0) --f;
    return f;
}

namespace {

// Largest accumulator frac that still represents the layer's output range
// (relu / linear layers) or the whole sigmoid input span [-8, 8].
int accumulator_frac_limit(Activation a, int out_frac) {
    return a == Activation::kSigmoid ? 27 : 16 + out_frac;
}

LayerSpec quantize_layer(const DenseLayer& d, BlockKind block, int in_frac, int out_frac, const std::string& name,
                         QuantizationReport* report) {
    double max_w = 0.0;
    for (float w : d.weight) max_w = std::max(max_w, std::abs(static_cast<double>(w)));
    double max_b = 0.0;
    for (float b : d.bias) max_b = std::max(max_b, std::abs(static_cast<double>(b)));

    int w_frac = weight_frac_for(max_w);
    w_frac = std::min(w_frac, accumulator_frac_limit(d.activation, out_frac) - in_frac);
    constexpr double kAccMax = std::numeric_limits<int32_t>::max();
    while (w_frac > -in_frac && max_b * std::ldexp(1.0, in_frac + w_frac) > kAccMax) --w_frac;
    w_frac = std::max(w_frac, -in_frac);

    std::vector<int> codes(d.weight.size());
    double max_err = 0.0;
    for (size_t i = 0; i < codes.size(); ++i) {
        const double scaled = std::nearbyint(std::ldexp(static_cast<double>(d.weight[i]), w_frac));
        codes[i] = static_cast<int>(std::clamp(scaled, -255.0, 255.0));
        max_err = std::max(max_err, std::abs(std::ldexp(codes[i], -w_frac) - d.weight[i]));
    }
    const int acc_frac = in_frac + w_frac;
    std::vector<int32_t> bias(d.bias.size());
    int clipped = 0;
    for (size_t i = 0; i < bias.size(); ++i) {
        bool sat = false;
        const double scaled = std::nearbyint(std::ldexp(static_cast<double>(d.bias[i]), acc_frac));
        bias[i] = saturate32(static_cast<int64_t>(std::clamp(scaled, -0x1p62, 0x1p62)), &sat);
        clipped += sat;
    }
    if (report) {
        LayerQuantReport r;
        r.name = name;
        r.in_frac = in_frac;
        r.w_frac = w_frac;
        r.out_frac = out_frac;
        r.max_abs_weight = max_w;
        r.max_weight_error = max_err;
        r.clipped_biases = clipped;
        report->layers.push_back(r);
    }
    return make_layer(block, d.in_width, d.out_width, codes, std::move(bias), d.activation, in_frac, w_frac, out_frac,
                      d.skip);
}

}  // namespace

QuantizedModel quantize_model(const FloatModel& model, const ActivationRanges* calibration, QuantizationReport* report) {
    model.validate();
    const bool cal = calibration != nullptr;
    if (report) {
        *report = QuantizationReport{};
        report->calibrated = cal;
    }
    auto observed = [&](std::vector<double> ActivationRanges::*stage, size_t i) {
        return cal && i < (calibration->*stage).size() ? (calibration->*stage)[i] : 0.0;
    };
    auto out_frac_for = [&](const DenseLayer& l, double seen) {
        if (l.activation == Activation::kSigmoid) return kQ1_14.frac_bits;
        return cal ? activation_frac_for(seen) : kDefaultActivationFrac;
    };

    QuantizedModel q;
    q.position_pe = quantize_frequencies(model.position_pe);
    if (model.direction_pe) q.direction_pe = quantize_frequencies(*model.direction_pe);
    q.position_fmt = QFormat{cal ? activation_frac_for(calibration->position) : kQ3_12.frac_bits};
    q.direction_fmt = kQ1_14;
    if (report) {
        report->position_frac = q.position_fmt.frac_bits;
        report->position_pe_frac = q.position_pe.fmt.frac_bits;
        report->direction_pe_frac = q.direction_pe ? q.direction_pe->fmt.frac_bits : 0;
    }

    constexpr int kEncodedFrac = EncodedFeatures::fmt.frac_bits;
    auto input_frac = [&](int prev, InputSource skip) {
        return skip == InputSource::kNone ? prev : std::min(prev, kEncodedFrac);
    };
    auto note_observed = [&](double seen) {
        if (report && cal) report->layers.back().observed_max = seen;
    };

    int prev = kEncodedFrac;
    for (size_t i = 0; i < model.trunk.size(); ++i) {
        const DenseLayer& l = model.trunk[i];
        const double seen = observed(&ActivationRanges::trunk, i);
        q.trunk.push_back(quantize_layer(l, BlockKind::kMonb, input_frac(prev, l.skip), out_frac_for(l, seen),
                                         "trunk." + std::to_string(i), report));
        note_observed(seen);
        prev = q.trunk.back().out_frac;
    }
    const int trunk_frac = prev;
    {
        const double seen = cal ? calibration->density : 0.0;
        q.density_head = quantize_layer(model.density_head, BlockKind::kSonb, trunk_frac,
                                        out_frac_for(model.density_head, seen), "density_head", report);
        note_observed(seen);
    }
    for (size_t i = 0; i < model.color_branch.size(); ++i) {
        const DenseLayer& l = model.color_branch[i];
        const double seen = observed(&ActivationRanges::color_branch, i);
        q.color_branch.push_back(quantize_layer(l, BlockKind::kMonb, input_frac(prev, l.skip), out_frac_for(l, seen),
                                                "color_branch." + std::to_string(i), report));
        note_observed(seen);
        prev = q.color_branch.back().out_frac;
    }
    q.color_head = quantize_layer(model.color_head, BlockKind::kSonb, prev, kQ1_14.frac_bits, "color_head", report);
    q.validate();
    return q;
}

}  // namespace icarus
