#pragma once

// MLP engine: y = f(Wx + b) computed as a grid of 64x64 sub-MVMs.
//
// Hidden layers run on the multi-output network block (MONB): 64 RMCM
// columns, each sharing one activation's odd multiples across 64 SSA rows,
// with an adder tree per row. A weight tile is loaded once per batch and
// stays stationary while every sample of the batch streams past it. The
// density and colour heads run on the single-output block (SONB), a row of
// 64 general multipliers.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "icarus/fxp.hpp"
#include "icarus/rmcm.hpp"

namespace icarus {

inline constexpr int kTileSize = 64;
inline constexpr int kBatchSize = 128;
inline constexpr int kMaxSonbRows = 4;

enum class Activation { kNone, kRelu, kSigmoid };
enum class InputSource { kNone, kEncodedPosition, kEncodedDirection };
enum class Residency { kInputMemory, kActMem1, kActMem2 };
enum class BlockKind { kMonb, kSonb };

const char* to_string(Activation a);
const char* to_string(InputSource s);
const char* to_string(Residency r);
Activation activation_from_string(const std::string& s);
InputSource input_source_from_string(const std::string& s);

constexpr int round_up_tile(int n) { return (n + kTileSize - 1) / kTileSize * kTileSize; }

/// One quantized layer. Weights are stored out-major, zero padded to whole
/// 64-wide column chunks (and, for MONB layers, whole 64-row blocks).
struct LayerSpec {
    BlockKind block = BlockKind::kMonb;
    int in_width = 0;   // logical: previous output width + skip width
    int out_width = 0;
    Activation activation = Activation::kRelu;
    InputSource skip_concat = InputSource::kNone;
    int in_frac = 12;
    int w_frac = 8;
    int out_frac = 12;
    std::vector<WeightCode> weights;  // rows() x in_padded()
    std::vector<int32_t> bias;        // out_width values at acc_frac()

    int in_padded() const { return round_up_tile(in_width); }
    int rows() const { return block == BlockKind::kMonb ? round_up_tile(out_width) : out_width; }
    int tile_rows() const { return block == BlockKind::kMonb ? rows() / kTileSize : 1; }
    int tile_cols() const { return in_padded() / kTileSize; }
    /// Weight-memory loads needed to run this layer over one batch.
    int tile_count() const { return tile_rows() * tile_cols(); }
    int acc_frac() const { return in_frac + w_frac; }
    const WeightCode& weight(int row, int col) const { return weights[static_cast<size_t>(row) * in_padded() + col]; }

    /// Throws std::invalid_argument on inconsistent sizes or formats.
    void validate() const;
};

/// Builds a LayerSpec from logical out x in weight values, padding with zeros.
LayerSpec make_layer(BlockKind block, int in_width, int out_width, std::span<const int> weights,
                     std::vector<int32_t> bias, Activation activation, int in_frac, int w_frac, int out_frac,
                     InputSource skip = InputSource::kNone);

struct ActivationBatch {
    int width = 0;
    int samples = 0;
    QFormat fmt{};
    Residency residency = Residency::kInputMemory;
    std::vector<int16_t> data;  // samples x width

    ActivationBatch() = default;
    ActivationBatch(int width, int samples, QFormat fmt, Residency residency);

    int16_t at(int sample, int i) const { return data[static_cast<size_t>(sample) * width + i]; }
    int16_t& at(int sample, int i) { return data[static_cast<size_t>(sample) * width + i]; }
    std::span<const int16_t> row(int sample) const {
        return {data.data() + static_cast<size_t>(sample) * width, static_cast<size_t>(width)};
    }
};

using WeightTile = std::array<WeightCode, kTileSize * kTileSize>;  // [row][col]

struct EngineCounters {
    uint64_t weight_tile_loads = 0;
    uint64_t input_mem_reads = 0;  // activation words
    uint64_t act_mem_reads = 0;
    uint64_t act_mem_writes = 0;
    uint64_t multiplies_exact = 0;   // RMCM products actually formed
    uint64_t multiplies_approx = 0;
    uint64_t sonb_multiplies = 0;
    uint64_t zero_gated_products = 0;
    uint64_t accumulator_saturations = 0;
    uint64_t output_saturations = 0;

    EngineCounters& operator+=(const EngineCounters& o);
};

/// Piecewise-linear sigmoid: 64 segments over [-8, 8], input clamped to that
/// range, result in Q1.14.
int16_t sigmoid_pwl(Acc32 x);

/// Bias add, activation and narrowing to out_fmt. acc and bias must share
/// frac_bits. Sigmoid output is produced in Q1.14 and then rescaled.
Fx16 act_quant(Acc32 acc, Acc32 bias, Activation kind, QFormat out_fmt, bool* saturated = nullptr);

/// out[s][r] = sum_c multiply(in[s][c], tile[r][c]). `inputs` is samples x 64.
/// Pure; counters, when given, receive products and zero-gating events.
std::vector<int32_t> tile_mvm(const WeightTile& tile, std::span<const int16_t> inputs, int samples,
                              MultiplierMode mode, EngineCounters* counters = nullptr);

class MlpEngine {
public:
    explicit MlpEngine(MultiplierMode mode = MultiplierMode::kExact, int batch_size = kBatchSize);

    MultiplierMode mode() const { return mode_; }
    int batch_size() const { return batch_size_; }

    /// Loads `tile` once and runs every sample of `inputs` through it.
    std::vector<int32_t> monb_tile_mvm(const WeightTile& tile, std::span<const int16_t> inputs, int samples);

    /// x (and optional skip source, appended after x) -> next activations,
    /// written to the activation memory opposite to x's residency.
    ActivationBatch layer_forward(const LayerSpec& layer, const ActivationBatch& x,
                                  const ActivationBatch* skip = nullptr);

    /// Raw head accumulators (samples x rows) at layer.acc_frac(), bias not added.
    std::vector<int32_t> sonb_forward(const LayerSpec& head, const ActivationBatch& x);

    /// sonb_forward followed by act_quant on every output.
    std::vector<Fx16> head_forward(const LayerSpec& head, const ActivationBatch& x);

    const EngineCounters& counters() const { return counters_; }
    /// Per-tile weight-load counts for a layer (row-major over the tile grid).
    std::vector<uint64_t> tile_loads(const LayerSpec& layer) const;
    const std::vector<Residency>& residency_trace() const { return trace_; }
    void reset_counters();

private:
    void note_tile_load(const LayerSpec& layer, int tile_index);

    MultiplierMode mode_;
    int batch_size_;
    EngineCounters counters_;
    std::unordered_map<const LayerSpec*, std::vector<uint64_t>> tile_loads_;
    std::vector<Residency> trace_;  // (read, write) pairs per MONB layer
};

WeightTile extract_tile(const LayerSpec& layer, int tile_row, int tile_col);

}  // namespace icarus
