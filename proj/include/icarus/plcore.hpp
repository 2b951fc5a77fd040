#pragma once

// One plenoptic core: PEU -> MLP engine -> VRU on batches of tagged samples.
//
// Only the sample inputs (position and direction, 6 x 2 B) enter and only
// finished pixels (3 x 2 B) leave through the simulated DRAM port. Every
// intermediate tensor stays in the core's input and activation memories.
// Coarse-pass rays hand their weights back to the host sampler instead of
// emitting a pixel; those bytes are counted separately.

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "icarus/mlp_engine.hpp"
#include "icarus/model.hpp"
#include "icarus/peu.hpp"
#include "icarus/vec.hpp"
#include "icarus/vru.hpp"

namespace icarus {

struct PerfCounters {
    uint64_t weight_tile_loads = 0;
    uint64_t input_mem_reads = 0;
    uint64_t act_mem_reads = 0;
    uint64_t act_mem_writes = 0;
    uint64_t dram_bytes_in = 0;
    uint64_t dram_bytes_out = 0;
    uint64_t sampler_feedback_bytes = 0;
    uint64_t multiplies_exact = 0;
    uint64_t multiplies_approx = 0;
    uint64_t sonb_multiplies = 0;
    uint64_t zero_gated_products = 0;
    uint64_t accumulator_saturations = 0;
    uint64_t output_saturations = 0;
    uint64_t input_saturations = 0;
    uint64_t pe_encodes = 0;
    uint64_t pe_bank0_reads = 0;
    uint64_t pe_bank1_reads = 0;
    uint64_t cordic_ops = 0;
    uint64_t vru_steps = 0;
    uint64_t samples = 0;
    uint64_t padded_samples = 0;
    uint64_t batches = 0;
    uint64_t pixels = 0;

    PerfCounters& operator+=(const PerfCounters& o);
    friend bool operator==(const PerfCounters&, const PerfCounters&) = default;
};

inline constexpr int kInputBytesPerSample = 6 * 2;
inline constexpr int kPixelBytes = 3 * 2;

enum class Pass { kCoarse, kFine };

struct PlCoreConfig {
    MultiplierMode mode = MultiplierMode::kExact;
    /// 128 in normal operation; smaller values are a diagnostic that shows
    /// what the weight-stationary schedule saves.
    int batch_size = kBatchSize;
    QFormat delta_fmt = kQ3_12;
    /// Separate network for the coarse pass; the main model when null.
    const QuantizedModel* coarse_model = nullptr;
};

struct TaggedSample {
    std::array<Fx16, 3> position{};
    std::array<Fx16, 3> direction{};
    Fx16 delta{};
    uint32_t ray = 0;
    uint32_t index = 0;  // position along the ray, front to back
};

struct SampleOutput {
    std::array<int16_t, 3> color{};  // Q1.14
    Fx16 sigma{};
};

struct RayResult {
    uint32_t ray = 0;
    Pass pass = Pass::kFine;
    std::array<Fx16, 3> pixel{};
    std::vector<int16_t> weights;  // coarse pass only, Q1.14
    int32_t transmittance = kOneQ14;
};

class PlCore {
public:
    explicit PlCore(const QuantizedModel& model, PlCoreConfig config = {});

    const PlCoreConfig& config() const { return config_; }
    const QuantizedModel& model(Pass pass) const;

    /// Host-side conversion of one sample to the core's input formats.
    /// Out-of-range coordinates saturate and are counted.
    TaggedSample make_sample(const Vec3& position, const Vec3& direction, double delta, uint32_t ray, uint32_t index);

    /// Declares a ray and the number of samples that will arrive for it.
    void begin_ray(uint32_t ray, int sample_count, Pass pass);

    /// Shades up to batch_size samples (the rest of the batch is zero
    /// padding) and feeds every sample of a declared ray to its VRU
    /// accumulator. Samples of one ray must arrive in index order.
    /// Throws std::invalid_argument for oversize batches, formats that do
    /// not match the model, or out-of-order samples.
    std::vector<SampleOutput> process_batch(std::span<const TaggedSample> batch, Pass pass = Pass::kFine);

    /// process_batch over consecutive batch_size chunks.
    void run(std::span<const TaggedSample> samples, Pass pass = Pass::kFine);

    /// Rays completed since the last call, in completion order.
    std::vector<RayResult> take_finished();
    size_t open_rays() const { return rays_.size(); }

    PerfCounters counters() const;
    const MlpEngine& engine() const { return engine_; }

private:
    struct RayState {
        Pass pass = Pass::kFine;
        int expected = 0;
        uint32_t next = 0;
        RayAccumulator acc;
    };

    const QuantizedModel& model_;
    PlCoreConfig config_;
    MlpEngine engine_;
    PerfCounters own_;
    PeuCounters peu_;
    std::unordered_map<uint32_t, RayState> rays_;
    std::vector<RayResult> finished_;
};

}  // namespace icarus
