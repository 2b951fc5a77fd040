#pragma once

// Frame rendering on the host side: rays, two-pass sampling, and either the
// fixed-point core or the float oracle as the shading backend.
//
// Rays are cut into fixed work units that workers claim in any order. Each
// ray draws its random numbers from its own stream (seed, pixel index), so
// images and counters do not depend on the worker count.

#include <cstdint>
#include <span>
#include <string>

#include "icarus/camera.hpp"
#include "icarus/image.hpp"
#include "icarus/model.hpp"
#include "icarus/oracle.hpp"
#include "icarus/plcore.hpp"

namespace icarus {

enum class RenderMode { kExact, kApprox, kFloat };
const char* to_string(RenderMode m);
RenderMode render_mode_from_string(const std::string& s);

struct RenderSettings {
    int coarse_samples = 64;
    /// 0 renders the stratified samples directly, with no importance pass.
    int fine_samples = 128;
    uint64_t seed = 0;
    /// Without jitter, samples sit at stratum midpoints and importance
    /// sampling uses evenly spaced quantiles.
    bool jitter = true;
    int workers = 1;
    int batch_size = kBatchSize;
    int rays_per_unit = 128;
    /// Fractional bits of the per-sample spacing; negative picks the largest
    /// format that holds far - near.
    int delta_frac = -1;

    void validate() const;
};

struct RenderResult {
    Image image;
    PerfCounters counters;
};

QFormat delta_format(const Camera& cam, const RenderSettings& s);

RenderResult render_fixed(const QuantizedModel& model, const Camera& cam, MultiplierMode mode, const RenderSettings& s,
                          const QuantizedModel* coarse_model = nullptr);

/// Float pipeline with identical sampling. When `ranges` is given it
/// receives the activation maxima seen while shading.
Image render_float(const FloatModel& model, const Camera& cam, const RenderSettings& s,
                   const FloatModel* coarse_model = nullptr, ActivationRanges* ranges = nullptr);

/// Activation maxima over every sample the float pipeline shades for `cams`.
ActivationRanges calibrate(const FloatModel& model, std::span<const Camera> cams, const RenderSettings& s);

}  // namespace icarus
