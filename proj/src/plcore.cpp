#include "icarus/plcore.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace icarus {

PerfCounters& PerfCounters::operator+=(const PerfCounters& o) {
    weight_tile_loads += o.weight_tile_loads;
    input_mem_reads += o.input_mem_reads;
    act_mem_reads += o.act_mem_reads;
    act_mem_writes += o.act_mem_writes;
    dram_bytes_in += o.dram_bytes_in;
    dram_bytes_out += o.dram_bytes_out;
    sampler_feedback_bytes += o.sampler_feedback_bytes;
    multiplies_exact += o.multiplies_exact;
    multiplies_approx += o.multiplies_approx;
    sonb_multiplies += o.sonb_multiplies;
    zero_gated_products += o.zero_gated_products;
    accumulator_saturations += o.accumulator_saturations;
    output_saturations += o.output_saturations;
    input_saturations += o.input_saturations;
    pe_encodes += o.pe_encodes;
    pe_bank0_reads += o.pe_bank0_reads;
    pe_bank1_reads += o.pe_bank1_reads;
    cordic_ops += o.cordic_ops;
    vru_steps += o.vru_steps;
    samples += o.samples;
    padded_samples += o.padded_samples;
    batches += o.batches;
    pixels += o.pixels;
    return *this;
}

PlCore::PlCore(const QuantizedModel& model, PlCoreConfig config)
    : model_(model), config_(config), engine_(config.mode, config.batch_size) {
    model_.validate();
    if (config_.coarse_model) config_.coarse_model->validate();
}

const QuantizedModel& PlCore::model(Pass pass) const {
    return pass == Pass::kCoarse && config_.coarse_model ? *config_.coarse_model : model_;
}

TaggedSample PlCore::make_sample(const Vec3& position, const Vec3& direction, double delta, uint32_t ray, uint32_t index) {
    const QuantizedModel& m = model_;
    TaggedSample s;
    bool sat = false;
    for (int k = 0; k < 3; ++k) {
        s.position[k] = quantize(position[k], m.position_fmt, &sat);
        s.direction[k] = quantize(direction[k], m.direction_fmt, &sat);
    }
    s.delta = quantize(delta, config_.delta_fmt, &sat);
    if (sat) own_.input_saturations += 1;
    s.ray = ray;
    s.index = index;
    return s;
}

void PlCore::begin_ray(uint32_t ray, int sample_count, Pass pass) {
    if (sample_count < 0) throw std::invalid_argument("begin_ray: negative sample count");
    if (rays_.contains(ray)) throw std::invalid_argument("begin_ray: ray " + std::to_string(ray) + " is already open");
    RayState st;
    st.pass = pass;
    st.expected = sample_count;
    st.acc.record_weights = pass == Pass::kCoarse;
    if (sample_count == 0) {
        RayResult r;
        r.ray = ray;
        r.pass = pass;
        r.pixel = resolve_pixel(st.acc);
        if (pass == Pass::kFine) {
            own_.dram_bytes_out += kPixelBytes;
            own_.pixels += 1;
        }
        finished_.push_back(std::move(r));
        return;
    }
    rays_.emplace(ray, std::move(st));
}

namespace {

void encode_into(ActivationBatch& out, int sample, std::span<const Fx16> p, const FrequencyMatrix& a, PeuCounters* c) {
    const EncodedFeatures e = encode(p, a, c);
    std::copy(e.values.begin(), e.values.end(), out.data.begin() + static_cast<ptrdiff_t>(sample) * out.width);
}

}  // namespace

std::vector<SampleOutput> PlCore::process_batch(std::span<const TaggedSample> batch, Pass pass) {
    const QuantizedModel& m = model(pass);
    const int bs = config_.batch_size;
    const int n = static_cast<int>(batch.size());
    if (n > bs) throw std::invalid_argument("process_batch: " + std::to_string(n) + " samples exceed the batch size");
    if (n == 0) return {};
    for (const TaggedSample& s : batch) {
        for (int k = 0; k < 3; ++k)
            if (s.position[k].fmt != m.position_fmt || s.direction[k].fmt != m.direction_fmt)
                throw std::invalid_argument("process_batch: sample formats do not match the model");
        if (s.delta.fmt != config_.delta_fmt) throw std::invalid_argument("process_batch: delta format mismatch");
    }

    // PEU: padded slots carry zero coordinates and are masked out below.
    const bool r6 = m.position_pe.mode == PeMode::kR6;
    ActivationBatch enc_pos(m.position_pe.encoded_width(), bs, EncodedFeatures::fmt, Residency::kInputMemory);
    ActivationBatch enc_dir;
    if (m.direction_pe)
        enc_dir = ActivationBatch(m.direction_pe->encoded_width(), bs, EncodedFeatures::fmt, Residency::kInputMemory);
    for (int s = 0; s < bs; ++s) {
        std::array<Fx16, 6> p;
        std::array<Fx16, 3> d;
        for (int k = 0; k < 3; ++k) {
            p[k] = s < n ? batch[s].position[k] : Fx16{0, m.position_fmt};
            d[k] = s < n ? batch[s].direction[k] : Fx16{0, m.direction_fmt};
            p[3 + k] = rescale(Acc32{d[k].raw, d[k].fmt.frac_bits}, m.position_fmt);
        }
        encode_into(enc_pos, s, std::span<const Fx16>(p.data(), r6 ? 6 : 3), m.position_pe, &peu_);
        if (m.direction_pe) encode_into(enc_dir, s, d, *m.direction_pe, &peu_);
    }

    auto skip_source = [&](InputSource src) -> const ActivationBatch* {
        switch (src) {
            case InputSource::kNone: return nullptr;
            case InputSource::kEncodedPosition: return &enc_pos;
            case InputSource::kEncodedDirection: return &enc_dir;
        }
        return nullptr;
    };

    ActivationBatch h = engine_.layer_forward(m.trunk.front(), enc_pos, skip_source(m.trunk.front().skip_concat));
    for (size_t i = 1; i < m.trunk.size(); ++i) h = engine_.layer_forward(m.trunk[i], h, skip_source(m.trunk[i].skip_concat));
    const std::vector<Fx16> sigma = engine_.head_forward(m.density_head, h);
    for (const LayerSpec& l : m.color_branch) h = engine_.layer_forward(l, h, skip_source(l.skip_concat));
    const std::vector<Fx16> rgb = engine_.head_forward(m.color_head, h);

    std::vector<SampleOutput> out(static_cast<size_t>(n));
    for (int s = 0; s < n; ++s) {
        out[s].sigma = sigma[s];
        for (int k = 0; k < 3; ++k) {
            const Fx16 c = rgb[static_cast<size_t>(s) * 3 + k];
            out[s].color[k] = rescale(Acc32{c.raw, c.fmt.frac_bits}, kQ1_14).raw;
        }
    }

    own_.batches += 1;
    own_.samples += static_cast<uint64_t>(n);
    own_.padded_samples += static_cast<uint64_t>(bs - n);
    own_.dram_bytes_in += static_cast<uint64_t>(n) * kInputBytesPerSample;

    // VRU: fold each declared ray's samples in order.
    for (int s = 0; s < n; ++s) {
        auto it = rays_.find(batch[s].ray);
        if (it == rays_.end()) continue;
        RayState& st = it->second;
        if (st.pass != pass) throw std::invalid_argument("process_batch: sample belongs to a ray of the other pass");
        if (batch[s].index != st.next)
            throw std::invalid_argument("process_batch: ray " + std::to_string(batch[s].ray) + " expected sample " +
                                        std::to_string(st.next) + ", got " + std::to_string(batch[s].index));
        vru_step(st.acc, SampleShade{out[s].color, out[s].sigma, batch[s].delta});
        own_.vru_steps += 1;
        if (static_cast<int>(++st.next) < st.expected) continue;

        RayResult r;
        r.ray = it->first;
        r.pass = st.pass;
        r.pixel = resolve_pixel(st.acc);
        r.transmittance = st.acc.transmittance;
        if (st.pass == Pass::kFine) {
            own_.dram_bytes_out += kPixelBytes;
            own_.pixels += 1;
        } else {
            r.weights = std::move(st.acc.weights);
            own_.sampler_feedback_bytes += r.weights.size() * sizeof(int16_t);
        }
        finished_.push_back(std::move(r));
        rays_.erase(it);
    }
    return out;
}

void PlCore::run(std::span<const TaggedSample> samples, Pass pass) {
    const size_t bs = static_cast<size_t>(config_.batch_size);
    for (size_t i = 0; i < samples.size(); i += bs) process_batch(samples.subspan(i, std::min(bs, samples.size() - i)), pass);
}

std::vector<RayResult> PlCore::take_finished() { return std::exchange(finished_, {}); }

PerfCounters PlCore::counters() const {
    PerfCounters c = own_;
    const EngineCounters& e = engine_.counters();
    c.weight_tile_loads = e.weight_tile_loads;
    c.input_mem_reads = e.input_mem_reads;
    c.act_mem_reads = e.act_mem_reads;
    c.act_mem_writes = e.act_mem_writes;
    c.multiplies_exact = e.multiplies_exact;
    c.multiplies_approx = e.multiplies_approx;
    c.sonb_multiplies = e.sonb_multiplies;
    c.zero_gated_products = e.zero_gated_products;
    c.accumulator_saturations = e.accumulator_saturations;
    c.output_saturations = e.output_saturations;
    c.pe_encodes = peu_.encodes;
    c.pe_bank0_reads = peu_.bank0_reads;
    c.pe_bank1_reads = peu_.bank1_reads;
    c.cordic_ops = peu_.cordic_ops;
    return c;
}

}  // namespace icarus
