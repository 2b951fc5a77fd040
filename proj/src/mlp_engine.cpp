#include "icarus/mlp_engine.hpp"

#include <algorithm>
#include <stdexcept>

namespace icarus {

namespace {

// sigmoid(-8 + k/4), k = 0..64, Q1.14.
constexpr std::array<int32_t, 65> kSigmoidTable = {
    5,     7,     9,     12,    15,    19,    25,    32,    41,    52,    67,    86,    110,
    141,   180,   230,   295,   376,   480,   612,   777,   984,   1243,  1562,  1953,  2426,
    2989,  3649,  4406,  5256,  6186,  7173,  8192,  9211,  10198, 11128, 11978, 12735, 13395,
    13958, 14431, 14822, 15141, 15400, 15607, 15772, 15904, 16008, 16089, 16154, 16204, 16243,
    16274, 16298, 16317, 16332, 16343, 16352, 16359, 16365, 16369, 16372, 16375, 16377, 16379};

Residency next_residency(Residency r) { return r == Residency::kActMem1 ? Residency::kActMem2 : Residency::kActMem1; }

int16_t convert(int16_t v, int from_frac, int to_frac, bool* saturated) {
    if (from_frac == to_frac) return v;
    return saturate16(shift_round_even(v, from_frac - to_frac), saturated);
}

}  // namespace

const char* to_string(Activation a) {
    switch (a) {
        case Activation::kNone: return "none";
        case Activation::kRelu: return "relu";
        case Activation::kSigmoid: return "sigmoid";
    }
    return "?";
}

const char* to_string(InputSource s) {
    switch (s) {
        case InputSource::kNone: return "none";
        case InputSource::kEncodedPosition: return "encoded_position";
        case InputSource::kEncodedDirection: return "encoded_direction";
    }
    return "?";
}

const char* to_string(Residency r) {
    switch (r) {
        case Residency::kInputMemory: return "input-mem";
        case Residency::kActMem1: return "act-mem-1";
        case Residency::kActMem2: return "act-mem-2";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "none") return Activation::kNone;
    if (s == "relu") return Activation::kRelu;
    if (s == "sigmoid") return Activation::kSigmoid;
    throw std::invalid_argument("unknown activation: " + s);
}

InputSource input_source_from_string(const std::string& s) {
    if (s == "none") return InputSource::kNone;
    if (s == "encoded_position") return InputSource::kEncodedPosition;
    if (s == "encoded_direction") return InputSource::kEncodedDirection;
    throw std::invalid_argument("unknown input source: " + s);
}

void LayerSpec::validate() const {
    if (in_width <= 0 || out_width <= 0) throw std::invalid_argument("layer: widths must be positive");
    if (block == BlockKind::kSonb && out_width > kMaxSonbRows)
        throw std::invalid_argument("layer: SONB heads have at most 4 outputs");
    if (weights.size() != static_cast<size_t>(rows()) * in_padded())
        throw std::invalid_argument("layer: weight storage does not match the padded tile grid");
    if (bias.size() != static_cast<size_t>(out_width)) throw std::invalid_argument("layer: bias length != out_width");
    if (in_frac < 0 || in_frac > 15 || out_frac < 0 || out_frac > 15)
        throw std::invalid_argument("layer: activation frac bits must be in [0, 15]");
    if (acc_frac() < 0 || acc_frac() > 40) throw std::invalid_argument("layer: accumulator frac bits out of range");
    for (int r = 0; r < rows(); ++r)
        for (int c = 0; c < in_padded(); ++c)
            if ((r >= out_width || c >= in_width) && weight(r, c).magnitude() != 0)
                throw std::invalid_argument("layer: padding weights must be zero");
}

LayerSpec make_layer(BlockKind block, int in_width, int out_width, std::span<const int> weights,
                     std::vector<int32_t> bias, Activation activation, int in_frac, int w_frac, int out_frac,
                     InputSource skip) {
    if (weights.size() != static_cast<size_t>(in_width) * out_width)
        throw std::invalid_argument("make_layer: expected out_width x in_width weights");
    LayerSpec l;
    l.block = block;
    l.in_width = in_width;
    l.out_width = out_width;
    l.activation = activation;
    l.skip_concat = skip;
    l.in_frac = in_frac;
    l.w_frac = w_frac;
    l.out_frac = out_frac;
    l.weights.assign(static_cast<size_t>(l.rows()) * l.in_padded(), WeightCode{});
    for (int r = 0; r < out_width; ++r)
        for (int c = 0; c < in_width; ++c)
            l.weights[static_cast<size_t>(r) * l.in_padded() + c] = encode_weight(weights[static_cast<size_t>(r) * in_width + c]);
    l.bias = std::move(bias);
    l.validate();
    return l;
}

ActivationBatch::ActivationBatch(int width_, int samples_, QFormat fmt_, Residency residency_)
    : width(width_), samples(samples_), fmt(fmt_), residency(residency_),
      data(static_cast<size_t>(width_) * samples_, 0) {}

EngineCounters& EngineCounters::operator+=(const EngineCounters& o) {
    weight_tile_loads += o.weight_tile_loads;
    input_mem_reads += o.input_mem_reads;
    act_mem_reads += o.act_mem_reads;
    act_mem_writes += o.act_mem_writes;
    multiplies_exact += o.multiplies_exact;
    multiplies_approx += o.multiplies_approx;
    sonb_multiplies += o.sonb_multiplies;
    zero_gated_products += o.zero_gated_products;
    accumulator_saturations += o.accumulator_saturations;
    output_saturations += o.output_saturations;
    return *this;
}

int16_t sigmoid_pwl(Acc32 x) {
    constexpr int kFrac = 16;
    constexpr int64_t kSpan = int64_t{16} << kFrac;  // [-8, 8]
    int64_t pos;
    if (x.frac_bits - kFrac < -40) {
        pos = x.raw > 0 ? kSpan : (x.raw < 0 ? 0 : kSpan / 2);
    } else {
        pos = shift_round_even(x.raw, x.frac_bits - kFrac) + kSpan / 2;
    }
    if (pos <= 0) return static_cast<int16_t>(kSigmoidTable.front());
    if (pos >= kSpan) return static_cast<int16_t>(kSigmoidTable.back());
    constexpr int kSegmentBits = kFrac - 2;  // segment width 1/4
    const int64_t idx = pos >> kSegmentBits;
    const int64_t t = pos & ((int64_t{1} << kSegmentBits) - 1);
    const int64_t lo = kSigmoidTable[idx];
    const int64_t hi = kSigmoidTable[idx + 1];
    return static_cast<int16_t>(lo + shift_round_even((hi - lo) * t, kSegmentBits));
}

Fx16 act_quant(Acc32 acc, Acc32 bias, Activation kind, QFormat out_fmt, bool* saturated) {
    if (acc.frac_bits != bias.frac_bits) throw std::invalid_argument("act_quant: accumulator and bias formats differ");
    int32_t sum = saturate32(int64_t{acc.raw} + bias.raw, saturated);
    switch (kind) {
        case Activation::kRelu:
            if (sum < 0) sum = 0;
            [[fallthrough]];
        case Activation::kNone: return rescale(Acc32{sum, acc.frac_bits}, out_fmt, saturated);
        case Activation::kSigmoid: return rescale(Acc32{sigmoid_pwl(Acc32{sum, acc.frac_bits}), 14}, out_fmt, saturated);
    }
    return Fx16{0, out_fmt};
}

std::vector<int32_t> tile_mvm(const WeightTile& tile, std::span<const int16_t> inputs, int samples,
                              MultiplierMode mode, EngineCounters* counters) {
    if (inputs.size() < static_cast<size_t>(samples) * kTileSize)
        throw std::invalid_argument("tile_mvm: inputs must hold samples x 64 activations");

    // Column-major SSA settings: column c's PCM feeds rows 0..63.
    std::array<SsaControl, kTileSize * kTileSize> ctrl;
    for (int r = 0; r < kTileSize; ++r)
        for (int c = 0; c < kTileSize; ++c) ctrl[c * kTileSize + r] = ssa_control(tile[r * kTileSize + c], mode);

    std::vector<int32_t> out(static_cast<size_t>(samples) * kTileSize, 0);
    uint64_t gated = 0;
    for (int s = 0; s < samples; ++s) {
        int32_t* row_sums = out.data() + static_cast<size_t>(s) * kTileSize;
        for (int c = 0; c < kTileSize; ++c) {
            const Subexpressions sub = precompute(inputs[static_cast<size_t>(s) * kTileSize + c]);
            if (sub.zero_flag) {
                gated += kTileSize;
                continue;
            }
            const std::array<int32_t, 9> table = sub.select_table();
            const SsaControl* col = &ctrl[c * kTileSize];
            for (int r = 0; r < kTileSize; ++r) row_sums[r] += ssa_product(table, col[r]);
        }
    }
    if (counters) {
        const uint64_t formed = static_cast<uint64_t>(samples) * kTileSize * kTileSize - gated;
        (mode == MultiplierMode::kExact ? counters->multiplies_exact : counters->multiplies_approx) += formed;
        counters->zero_gated_products += gated;
    }
    return out;
}

WeightTile extract_tile(const LayerSpec& layer, int tile_row, int tile_col) {
    WeightTile tile{};
    for (int r = 0; r < kTileSize; ++r)
        for (int c = 0; c < kTileSize; ++c)
            tile[r * kTileSize + c] = layer.weight(tile_row * kTileSize + r, tile_col * kTileSize + c);
    return tile;
}

MlpEngine::MlpEngine(MultiplierMode mode, int batch_size) : mode_(mode), batch_size_(batch_size) {
    if (batch_size < 1) throw std::invalid_argument("MlpEngine: batch size must be positive");
}

void MlpEngine::reset_counters() {
    counters_ = EngineCounters{};
    tile_loads_.clear();
    trace_.clear();
}

void MlpEngine::note_tile_load(const LayerSpec& layer, int tile_index) {
    auto& v = tile_loads_[&layer];
    if (v.empty()) v.assign(static_cast<size_t>(layer.tile_count()), 0);
    v[tile_index] += 1;
    counters_.weight_tile_loads += 1;
}

std::vector<uint64_t> MlpEngine::tile_loads(const LayerSpec& layer) const {
    auto it = tile_loads_.find(&layer);
    if (it == tile_loads_.end()) return std::vector<uint64_t>(static_cast<size_t>(layer.tile_count()), 0);
    return it->second;
}

std::vector<int32_t> MlpEngine::monb_tile_mvm(const WeightTile& tile, std::span<const int16_t> inputs, int samples) {
    counters_.weight_tile_loads += 1;
    return tile_mvm(tile, inputs, samples, mode_, &counters_);
}

ActivationBatch MlpEngine::layer_forward(const LayerSpec& layer, const ActivationBatch& x, const ActivationBatch* skip) {
    if (layer.block != BlockKind::kMonb) throw std::invalid_argument("layer_forward: layer is not a MONB layer");
    const int skip_width = skip ? skip->width : 0;
    if (x.width + skip_width != layer.in_width)
        throw std::invalid_argument("layer_forward: input width " + std::to_string(x.width + skip_width) +
                                    " != layer in_width " + std::to_string(layer.in_width));
    if (skip && skip->samples != x.samples) throw std::invalid_argument("layer_forward: skip batch size differs");
    if (x.samples > batch_size_) throw std::invalid_argument("layer_forward: batch larger than the engine batch size");

    const int samples = x.samples;
    const int in_pad = layer.in_padded();

    // Operand assembly at the layer's input format; padding columns stay zero.
    bool sat = false;
    std::vector<int16_t> in(static_cast<size_t>(samples) * in_pad, 0);
    for (int s = 0; s < samples; ++s) {
        int16_t* dst = in.data() + static_cast<size_t>(s) * in_pad;
        for (int i = 0; i < x.width; ++i) dst[i] = convert(x.at(s, i), x.fmt.frac_bits, layer.in_frac, &sat);
        if (skip)
            for (int i = 0; i < skip->width; ++i)
                dst[x.width + i] = convert(skip->at(s, i), skip->fmt.frac_bits, layer.in_frac, &sat);
    }
    if (sat) counters_.output_saturations += 1;

    const Residency out_residency = next_residency(x.residency);
    ActivationBatch y(layer.out_width, samples, QFormat{layer.out_frac}, out_residency);
    trace_.push_back(x.residency);
    trace_.push_back(out_residency);

    const bool primary_in_input_mem = x.residency == Residency::kInputMemory;
    std::vector<int16_t> chunk(static_cast<size_t>(samples) * kTileSize);
    std::vector<int64_t> acc(static_cast<size_t>(samples) * kTileSize);
    for (int tr = 0; tr < layer.tile_rows(); ++tr) {
        std::fill(acc.begin(), acc.end(), 0);
        for (int tc = 0; tc < layer.tile_cols(); ++tc) {
            for (int s = 0; s < samples; ++s)
                std::copy_n(in.data() + static_cast<size_t>(s) * in_pad + tc * kTileSize, kTileSize,
                            chunk.data() + static_cast<size_t>(s) * kTileSize);
            // Word reads split by the memory that holds each column.
            const int col0 = tc * kTileSize;
            const int from_x = std::clamp(x.width - col0, 0, kTileSize);
            const int from_skip = std::clamp(layer.in_width - col0, 0, kTileSize) - from_x;
            (primary_in_input_mem ? counters_.input_mem_reads : counters_.act_mem_reads) +=
                static_cast<uint64_t>(from_x) * samples;
            counters_.input_mem_reads += static_cast<uint64_t>(from_skip) * samples;

            note_tile_load(layer, tr * layer.tile_cols() + tc);
            const std::vector<int32_t> partial = tile_mvm(extract_tile(layer, tr, tc), chunk, samples, mode_, &counters_);
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += partial[i];
        }
        for (int s = 0; s < samples; ++s) {
            for (int r = 0; r < kTileSize; ++r) {
                const int row = tr * kTileSize + r;
                if (row >= layer.out_width) break;
                bool acc_sat = false;
                const int32_t a = saturate32(acc[static_cast<size_t>(s) * kTileSize + r], &acc_sat);
                if (acc_sat) counters_.accumulator_saturations += 1;
                bool out_sat = false;
                y.at(s, row) = act_quant(Acc32{a, layer.acc_frac()}, Acc32{layer.bias[row], layer.acc_frac()},
                                         layer.activation, y.fmt, &out_sat)
                                   .raw;
                if (out_sat) counters_.output_saturations += 1;
            }
        }
    }
    counters_.act_mem_writes += static_cast<uint64_t>(samples) * layer.out_width;
    return y;
}

std::vector<int32_t> MlpEngine::sonb_forward(const LayerSpec& head, const ActivationBatch& x) {
    if (head.block != BlockKind::kSonb) throw std::invalid_argument("sonb_forward: layer is not a SONB head");
    if (x.width != head.in_width) throw std::invalid_argument("sonb_forward: input width mismatch");
    if (x.samples > batch_size_) throw std::invalid_argument("sonb_forward: batch larger than the engine batch size");

    const int k = head.out_width;
    std::vector<int64_t> acc(static_cast<size_t>(x.samples) * k, 0);
    bool sat = false;
    for (int tc = 0; tc < head.tile_cols(); ++tc) {
        note_tile_load(head, tc);
        const int col0 = tc * kTileSize;
        const int cols = std::min(kTileSize, x.width - col0);
        for (int s = 0; s < x.samples; ++s) {
            for (int r = 0; r < k; ++r) {
                int64_t dot = 0;
                for (int c = 0; c < cols; ++c) {
                    const int16_t v = convert(x.at(s, col0 + c), x.fmt.frac_bits, head.in_frac, &sat);
                    dot += int64_t{v} * head.weight(r, col0 + c).value();
                }
                acc[static_cast<size_t>(s) * k + r] += dot;
            }
        }
        const bool from_input = x.residency == Residency::kInputMemory;
        (from_input ? counters_.input_mem_reads : counters_.act_mem_reads) += static_cast<uint64_t>(cols) * x.samples;
        counters_.sonb_multiplies += static_cast<uint64_t>(x.samples) * k * kTileSize;
    }
    if (sat) counters_.output_saturations += 1;

    std::vector<int32_t> out(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) {
        bool acc_sat = false;
        out[i] = saturate32(acc[i], &acc_sat);
        if (acc_sat) counters_.accumulator_saturations += 1;
    }
    return out;
}

std::vector<Fx16> MlpEngine::head_forward(const LayerSpec& head, const ActivationBatch& x) {
    const std::vector<int32_t> acc = sonb_forward(head, x);
    const int k = head.out_width;
    std::vector<Fx16> out(acc.size());
    for (int s = 0; s < x.samples; ++s)
        for (int r = 0; r < k; ++r) {
            bool sat = false;
            const size_t i = static_cast<size_t>(s) * k + r;
            out[i] = act_quant(Acc32{acc[i], head.acc_frac()}, Acc32{head.bias[r], head.acc_frac()}, head.activation,
                               QFormat{head.out_frac}, &sat);
            if (sat) counters_.output_saturations += 1;
        }
    return out;
}

}  // namespace icarus
