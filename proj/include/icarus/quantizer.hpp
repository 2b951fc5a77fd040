#pragma once

// Post-training linear quantization with power-of-two scales.
//
// Weights: per layer, w_frac is the largest f with max|w| * 2^f <= 255,
// further limited so the accumulator (in_frac + w_frac fractional bits)
// still spans the layer's output range and the biases. Activations: with
// calibration ranges, the largest frac that holds the observed maximum;
// without, Q3.12. Encoded features are Q1.14, the colour head emits Q1.14.

#include <optional>
#include <string>
#include <vector>

#include "icarus/model.hpp"
#include "icarus/oracle.hpp"

namespace icarus {

inline constexpr int kDefaultActivationFrac = 12;
inline constexpr int kZeroLayerWeightFrac = 8;

/// Largest f in [-16, 24] with max_abs * 2^f <= 255 (8 for max_abs == 0).
int weight_frac_for(double max_abs);

/// Largest f in [0, 15] with round(max_abs * 2^f) <= 32767.
int activation_frac_for(double max_abs);

struct LayerQuantReport {
    std::string name;
    int in_frac = 0;
    int w_frac = 0;
    int out_frac = 0;
    double max_abs_weight = 0.0;
    double observed_max = 0.0;  // 0 without calibration
    double max_weight_error = 0.0;
    int clipped_biases = 0;
};

struct QuantizationReport {
    bool calibrated = false;
    int position_frac = 12;
    int position_pe_frac = 0;
    int direction_pe_frac = 0;
    std::vector<LayerQuantReport> layers;
};

QuantizedModel quantize_model(const FloatModel& model, const ActivationRanges* calibration = nullptr,
                              QuantizationReport* report = nullptr);

}  // namespace icarus
