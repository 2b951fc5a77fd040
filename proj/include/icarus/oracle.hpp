#pragma once

// Host-precision reference pipeline: encoding, MLP and compositing in
// double arithmetic on a FloatModel. Every fixed-point result is judged
// against these functions.

#include <array>
#include <span>
#include <vector>

#include "icarus/model.hpp"
#include "icarus/vec.hpp"

namespace icarus {

struct OracleShade {
    Vec3 color{};
    double sigma = 0.0;
};

/// Largest magnitudes seen at each stage; drives the quantizer's choice of
/// activation formats.
struct ActivationRanges {
    double position = 0.0;  // max |coordinate|
    std::vector<double> trunk;
    std::vector<double> color_branch;
    double density = 0.0;
    uint64_t samples = 0;

    void merge(const ActivationRanges& o);
};

/// One (position, direction) query. The direction is ignored by models
/// without a direction input, and forms the second half of the input for an
/// R6 position encoder.
OracleShade oracle_forward(const FloatModel& model, const Vec3& position, const Vec3& direction,
                           ActivationRanges* ranges = nullptr);

struct HostShade {
    Vec3 color{};
    double sigma = 0.0;
    double delta = 0.0;
};

struct OracleComposite {
    Vec3 pixel{};
    std::vector<double> weights;
    double transmittance = 1.0;
};

/// C = sum_i exp(-sum_{j<i} sigma_j delta_j) (1 - exp(-sigma_i delta_i)) c_i
OracleComposite composite_direct(std::span<const HostShade> samples);

/// T_{i+1} = T_i exp(-sigma_i delta_i), w_i = T_i - T_{i+1}, C += w_i c_i
OracleComposite composite_fold(std::span<const HostShade> samples);

}  // namespace icarus
