#pragma once

// Network descriptions.
//
// Topology (both float and quantized models share it):
//
//   encoded position --> trunk[0] -> ... -> trunk[n-1] --+--> density head (1, relu)
//                                                         |
//                                                         +--> color_branch[0] -> ... --> color head (3, sigmoid)
//
// Any trunk or colour-branch layer may append an encoded input (position or
// direction) after its primary input; that is how the NeRF skip connection
// and the view-direction injection are expressed. With an R6 position
// encoder the (position, direction) pair is encoded jointly and there is no
// separate direction encoder.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icarus/mlp_engine.hpp"
#include "icarus/peu.hpp"

namespace icarus {

struct PeSettings {
    PeKind kind = PeKind::kNerf;
    PeMode mode = PeMode::kR3;
    int num_frequencies = 10;               // NeRF: L
    int features = 64;                      // RFF: columns of A
    std::array<double, 6> scales{1, 1, 1, 1, 1, 1};  // RFF: per-row std dev (isotropic uses scales[0])
};

struct LayerShape {
    int width = 256;
    Activation activation = Activation::kRelu;
    InputSource skip = InputSource::kNone;
};

struct Topology {
    PeSettings position;
    std::optional<PeSettings> direction;
    std::vector<LayerShape> trunk;
    std::vector<LayerShape> color_branch;
};

/// 8 x 256 trunk with the position skip into layer 5, a 256-wide linear
/// feature layer, then the direction-conditioned 128-wide layer.
Topology nerf_topology();

/// `layers` x `width` relu trunk and, when `direction_frequencies` > 0, one
/// `width`-wide relu colour layer that takes the encoded direction.
Topology small_topology(int layers, int width, int position_frequencies, int direction_frequencies);

struct DenseLayer {
    int in_width = 0;
    int out_width = 0;
    Activation activation = Activation::kRelu;
    InputSource skip = InputSource::kNone;
    std::vector<float> weight;  // out x in, row-major
    std::vector<float> bias;    // out

    float w(int row, int col) const { return weight[static_cast<size_t>(row) * in_width + col]; }
};

struct FloatModel {
    FrequencySpec position_pe;
    std::optional<FrequencySpec> direction_pe;
    std::vector<DenseLayer> trunk;
    std::vector<DenseLayer> color_branch;
    DenseLayer density_head;
    DenseLayer color_head;

    int skip_width(InputSource s) const;
    /// Throws std::invalid_argument if widths do not chain.
    void validate() const;
};

struct RandomInit {
    double weight_gain = 1.0;     // multiplies the He-normal std dev
    double bias_std = 0.05;
    double density_bias = 0.0;
    double color_bias = 0.0;
};

/// He-normal weights; RFF matrices drawn with the topology's scales.
FloatModel random_model(const Topology& topology, uint64_t seed, const RandomInit& init = {});

struct QuantizedModel {
    FrequencyMatrix position_pe;
    std::optional<FrequencyMatrix> direction_pe;
    QFormat position_fmt = kQ3_12;
    QFormat direction_fmt = kQ1_14;
    std::vector<LayerSpec> trunk;
    std::vector<LayerSpec> color_branch;
    LayerSpec density_head;
    LayerSpec color_head;

    int skip_width(InputSource s) const;
    void validate() const;
    /// Weight-memory loads needed to run one batch through the whole network.
    int total_weight_tiles() const;
    /// The float network whose weights are exactly the quantized values.
    FloatModel dequantized() const;
};

}  // namespace icarus
