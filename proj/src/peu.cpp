#include "icarus/peu.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace icarus {

const char* to_string(PeKind kind) {
    switch (kind) {
        case PeKind::kNerf: return "nerf";
        case PeKind::kIsotropicRff: return "isotropic_rff";
        case PeKind::kAnisotropicRff: return "anisotropic_rff";
    }
    return "?";
}

const char* to_string(PeMode mode) { return mode == PeMode::kR3 ? "r3" : "r6"; }

PeKind pe_kind_from_string(const std::string& s) {
    if (s == "nerf") return PeKind::kNerf;
    if (s == "isotropic_rff") return PeKind::kIsotropicRff;
    if (s == "anisotropic_rff") return PeKind::kAnisotropicRff;
    throw std::invalid_argument("unknown positional encoding kind: " + s);
}

PeMode pe_mode_from_string(const std::string& s) {
    if (s == "r3") return PeMode::kR3;
    if (s == "r6") return PeMode::kR6;
    throw std::invalid_argument("unknown positional encoding mode: " + s);
}

PeuCounters& PeuCounters::operator+=(const PeuCounters& o) {
    encodes += o.encodes;
    bank0_reads += o.bank0_reads;
    bank1_reads += o.bank1_reads;
    mac_stages += o.mac_stages;
    cordic_ops += o.cordic_ops;
    return *this;
}

FrequencySpec build_nerf_frequencies(int num_frequencies) {
    if (num_frequencies < 1 || 3 * num_frequencies > kBankCapacity)
        throw std::invalid_argument("build_nerf_frequencies: L must be in [1, 42]");
    FrequencySpec spec;
    spec.kind = PeKind::kNerf;
    spec.mode = PeMode::kR3;
    spec.features = 3 * num_frequencies;
    spec.a.assign(static_cast<size_t>(3 * spec.features), 0.0);
    for (int l = 0; l < num_frequencies; ++l) {
        const double f = std::ldexp(std::numbers::pi, l);
        for (int j = 0; j < 3; ++j) spec.a[static_cast<size_t>(j) * spec.features + 3 * l + j] = f;
    }
    return spec;
}

void FrequencyMatrix::validate() const {
    if (features < 1 || features > kBankCapacity)
        throw std::invalid_argument("frequency matrix: feature count must be in [1, 128]");
    if (bank0.size() != static_cast<size_t>(3 * features))
        throw std::invalid_argument("frequency matrix: bank 0 must hold 3 x features words");
    if (mode == PeMode::kR6 && bank1.size() != bank0.size())
        throw std::invalid_argument("frequency matrix: R6 mode needs bank 1 with the same feature count");
    if (mode == PeMode::kR3 && !bank1.empty())
        throw std::invalid_argument("frequency matrix: R3 mode leaves bank 1 empty");
    if (fmt.frac_bits < 0 || fmt.frac_bits > 15)
        throw std::invalid_argument("frequency matrix: frac_bits must be in [0, 15]");
}

FrequencyMatrix make_frequency_matrix(PeKind kind, PeMode mode, int features, QFormat fmt,
                                      std::vector<int16_t> bank0, std::vector<int16_t> bank1) {
    FrequencyMatrix m;
    m.kind = kind;
    m.mode = mode;
    m.features = features;
    m.fmt = fmt;
    m.bank0 = std::move(bank0);
    m.bank1 = std::move(bank1);
    m.validate();

    // Worst-case |z| over any 16-bit input vector.
    uint64_t worst = 0;
    for (int f = 0; f < features; ++f) {
        uint64_t col = 0;
        for (int j = 0; j < 3; ++j) {
            col += static_cast<uint64_t>(std::abs(int{m.bank0[static_cast<size_t>(j) * features + f]}));
            if (!m.bank1.empty())
                col += static_cast<uint64_t>(std::abs(int{m.bank1[static_cast<size_t>(j) * features + f]}));
        }
        worst = std::max(worst, col * 32768u);
    }
    const int width = std::bit_width(worst);
    m.z_shift = width > 31 ? width - 31 : 0;
    return m;
}

FrequencyMatrix quantize_frequencies(const FrequencySpec& spec) {
    if (spec.features < 1 || spec.features > kBankCapacity)
        throw std::invalid_argument("quantize_frequencies: feature count must be in [1, 128]");
    if (spec.a.size() != static_cast<size_t>(spec.rows() * spec.features))
        throw std::invalid_argument("quantize_frequencies: matrix size does not match mode and features");

    double max_abs = 0.0;
    for (double v : spec.a) {
        if (!std::isfinite(v)) throw std::invalid_argument("quantize_frequencies: non-finite frequency");
        max_abs = std::max(max_abs, std::abs(v));
    }
    int frac = 15;
    while (frac >= 0 && std::nearbyint(std::ldexp(max_abs, frac)) > 32767.0) --frac;
    if (frac < 0) throw std::invalid_argument("quantize_frequencies: largest frequency does not fit 16 bits");

    const QFormat fmt{frac};
    std::vector<int16_t> bank0(static_cast<size_t>(3 * spec.features));
    std::vector<int16_t> bank1;
    for (int j = 0; j < 3; ++j)
        for (int f = 0; f < spec.features; ++f)
            bank0[static_cast<size_t>(j) * spec.features + f] = quantize(spec.at(j, f), fmt).raw;
    if (spec.mode == PeMode::kR6) {
        bank1.resize(bank0.size());
        for (int j = 0; j < 3; ++j)
            for (int f = 0; f < spec.features; ++f)
                bank1[static_cast<size_t>(j) * spec.features + f] = quantize(spec.at(3 + j, f), fmt).raw;
    }
    return make_frequency_matrix(spec.kind, spec.mode, spec.features, fmt, std::move(bank0), std::move(bank1));
}

FrequencySpec dequantize(const FrequencyMatrix& m) {
    FrequencySpec spec;
    spec.kind = m.kind;
    spec.mode = m.mode;
    spec.features = m.features;
    spec.a.resize(static_cast<size_t>(spec.rows() * m.features));
    for (size_t i = 0; i < m.bank0.size(); ++i) spec.a[i] = m.bank0[i] * m.fmt.lsb();
    for (size_t i = 0; i < m.bank1.size(); ++i) spec.a[m.bank0.size() + i] = m.bank1[i] * m.fmt.lsb();
    return spec;
}

std::vector<Acc32> frequency_mvm(std::span<const Fx16> p, const FrequencyMatrix& a, PeuCounters* counters) {
    const int dim = pe_input_dim(a.mode);
    if (static_cast<int>(p.size()) != dim)
        throw std::invalid_argument("encode: input has " + std::to_string(p.size()) + " components, mode needs " +
                                    std::to_string(dim));
    for (const Fx16& v : p)
        if (!(v.fmt == p[0].fmt)) throw std::invalid_argument("encode: input components must share one format");

    const int z_frac = a.fmt.frac_bits + p[0].fmt.frac_bits - a.z_shift;
    std::vector<Acc32> z(static_cast<size_t>(a.features));
    for (int f = 0; f < a.features; ++f) {
        // Cascaded MAC: stage j adds p_j * a_jf to the running sum.
        int64_t acc = 0;
        for (int j = 0; j < 3; ++j) acc += int64_t{p[j].raw} * a.bank0[static_cast<size_t>(j) * a.features + f];
        if (a.mode == PeMode::kR6)
            for (int j = 0; j < 3; ++j)
                acc += int64_t{p[3 + j].raw} * a.bank1[static_cast<size_t>(j) * a.features + f];
        z[f] = Acc32{saturate32(shift_round_even(acc, a.z_shift)), z_frac};
    }
    if (counters) {
        counters->bank0_reads += static_cast<uint64_t>(3 * a.features);
        if (a.mode == PeMode::kR6) counters->bank1_reads += static_cast<uint64_t>(3 * a.features);
        counters->mac_stages += static_cast<uint64_t>(dim * a.features);
    }
    return z;
}

EncodedFeatures encode(std::span<const Fx16> p, const FrequencyMatrix& a, PeuCounters* counters) {
    const std::vector<Acc32> z = frequency_mvm(p, a, counters);
    EncodedFeatures out;
    out.values.resize(static_cast<size_t>(2 * a.features));
    for (int f = 0; f < a.features; ++f) {
        const SinCos sc = cordic_sincos(z[f]);
        out.values[f] = sc.cos.raw;
        out.values[a.features + f] = sc.sin.raw;
    }
    if (counters) {
        counters->encodes += 1;
        counters->cordic_ops += static_cast<uint64_t>(a.features);
    }
    return out;
}

std::vector<double> encode_reference(std::span<const double> p, const FrequencySpec& a) {
    if (static_cast<int>(p.size()) != a.rows()) throw std::invalid_argument("encode_reference: dimension mismatch");
    std::vector<double> out(static_cast<size_t>(2 * a.features));
    for (int f = 0; f < a.features; ++f) {
        double z = 0.0;
        for (int j = 0; j < a.rows(); ++j) z += a.at(j, f) * p[j];
        out[f] = std::cos(z);
        out[a.features + f] = std::sin(z);
    }
    return out;
}

}  // namespace icarus
