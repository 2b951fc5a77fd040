#include "icarus/model.hpp"

#include <cmath>
#include <stdexcept>

#include "icarus/random.hpp"

namespace icarus {

Topology nerf_topology() {
    Topology t;
    t.position = PeSettings{PeKind::kNerf, PeMode::kR3, 10};
    t.direction = PeSettings{PeKind::kNerf, PeMode::kR3, 4};
    t.trunk.assign(8, LayerShape{256, Activation::kRelu, InputSource::kNone});
    t.trunk[5].skip = InputSource::kEncodedPosition;
    t.color_branch = {LayerShape{256, Activation::kNone, InputSource::kNone},
                      LayerShape{128, Activation::kRelu, InputSource::kEncodedDirection}};
    return t;
}

Topology small_topology(int layers, int width, int position_frequencies, int direction_frequencies) {
    Topology t;
    t.position = PeSettings{PeKind::kNerf, PeMode::kR3, position_frequencies};
    t.trunk.assign(static_cast<size_t>(layers), LayerShape{width, Activation::kRelu, InputSource::kNone});
    if (direction_frequencies > 0) {
        t.direction = PeSettings{PeKind::kNerf, PeMode::kR3, direction_frequencies};
        t.color_branch = {LayerShape{width, Activation::kRelu, InputSource::kEncodedDirection}};
    }
    return t;
}

namespace {

template <typename Layer>
int primary_width_check(const std::vector<Layer>& layers, int primary, auto skip_width, auto in_of, auto out_of,
                        const char* group) {
    for (size_t i = 0; i < layers.size(); ++i) {
        const int expected = primary + skip_width(layers[i]);
        if (in_of(layers[i]) != expected)
            throw std::invalid_argument(std::string(group) + "[" + std::to_string(i) + "]: in_width " +
                                        std::to_string(in_of(layers[i])) + ", expected " + std::to_string(expected));
        primary = out_of(layers[i]);
    }
    return primary;
}

void check_head(int in_width, int expected_in, int out_width, int expected_out, const char* name) {
    if (in_width != expected_in || out_width != expected_out)
        throw std::invalid_argument(std::string(name) + " head has shape " + std::to_string(out_width) + "x" +
                                    std::to_string(in_width) + ", expected " + std::to_string(expected_out) + "x" +
                                    std::to_string(expected_in));
}

FrequencySpec random_frequencies(const PeSettings& s, Rng& rng) {
    if (s.kind == PeKind::kNerf) {
        if (s.mode != PeMode::kR3) throw std::invalid_argument("NeRF frequencies are R3 only");
        return build_nerf_frequencies(s.num_frequencies);
    }
    if (s.features < 1 || s.features > kBankCapacity) throw std::invalid_argument("RFF feature count must be in [1, 128]");
    FrequencySpec f;
    f.kind = s.kind;
    f.mode = s.mode;
    f.features = s.features;
    f.a.resize(static_cast<size_t>(f.rows() * f.features));
    for (int r = 0; r < f.rows(); ++r) {
        const double scale = s.kind == PeKind::kIsotropicRff ? s.scales[0] : s.scales[r];
        for (int c = 0; c < f.features; ++c) f.a[static_cast<size_t>(r) * f.features + c] = static_cast<float>(scale * rng.normal());
    }
    return f;
}

DenseLayer random_dense(int in, int out, Activation act, InputSource skip, double gain, double bias_std,
                        double bias_mean, Rng& rng) {
    DenseLayer l;
    l.in_width = in;
    l.out_width = out;
    l.activation = act;
    l.skip = skip;
    const double std_dev = gain * std::sqrt(2.0 / in);
    l.weight.resize(static_cast<size_t>(in) * out);
    for (float& w : l.weight) w = static_cast<float>(std_dev * rng.normal());
    l.bias.resize(static_cast<size_t>(out));
    for (float& b : l.bias) b = static_cast<float>(bias_mean + bias_std * rng.normal());
    return l;
}

}  // namespace

int FloatModel::skip_width(InputSource s) const {
    switch (s) {
        case InputSource::kNone: return 0;
        case InputSource::kEncodedPosition: return position_pe.encoded_width();
        case InputSource::kEncodedDirection:
            if (!direction_pe) throw std::invalid_argument("layer consumes the encoded direction but the model has none");
            return direction_pe->encoded_width();
    }
    return 0;
}

void FloatModel::validate() const {
    if (trunk.empty()) throw std::invalid_argument("model: trunk must have at least one layer");
    if (position_pe.mode == PeMode::kR6 && direction_pe)
        throw std::invalid_argument("model: an R6 position encoder already consumes the direction");
    if (direction_pe && direction_pe->mode != PeMode::kR3)
        throw std::invalid_argument("model: the direction encoder must be R3");
    auto sw = [this](const DenseLayer& l) { return skip_width(l.skip); };
    auto in_of = [](const DenseLayer& l) { return l.in_width; };
    auto out_of = [](const DenseLayer& l) { return l.out_width; };
    const int trunk_out = primary_width_check(trunk, position_pe.encoded_width(), sw, in_of, out_of, "trunk");
    const int color_in = primary_width_check(color_branch, trunk_out, sw, in_of, out_of, "color_branch");
    check_head(density_head.in_width, trunk_out, density_head.out_width, 1, "density");
    check_head(color_head.in_width, color_in, color_head.out_width, 3, "color");
    auto check_sizes = [](const DenseLayer& l) {
        if (l.weight.size() != static_cast<size_t>(l.in_width) * l.out_width || l.bias.size() != static_cast<size_t>(l.out_width))
            throw std::invalid_argument("model: tensor sizes do not match layer widths");
    };
    for (const auto& l : trunk) check_sizes(l);
    for (const auto& l : color_branch) check_sizes(l);
    check_sizes(density_head);
    check_sizes(color_head);
}

FloatModel random_model(const Topology& topology, uint64_t seed, const RandomInit& init) {
    Rng rng(seed);
    FloatModel m;
    m.position_pe = random_frequencies(topology.position, rng);
    if (topology.direction) m.direction_pe = random_frequencies(*topology.direction, rng);

    int primary = m.position_pe.encoded_width();
    for (const LayerShape& s : topology.trunk) {
        const int in = primary + m.skip_width(s.skip);
        m.trunk.push_back(random_dense(in, s.width, s.activation, s.skip, init.weight_gain, init.bias_std, 0.0, rng));
        primary = s.width;
    }
    const int trunk_out = primary;
    for (const LayerShape& s : topology.color_branch) {
        const int in = primary + m.skip_width(s.skip);
        m.color_branch.push_back(random_dense(in, s.width, s.activation, s.skip, init.weight_gain, init.bias_std, 0.0, rng));
        primary = s.width;
    }
    const double head_gain = init.weight_gain * std::sqrt(0.5);
    m.density_head = random_dense(trunk_out, 1, Activation::kRelu, InputSource::kNone, head_gain, init.bias_std,
                                  init.density_bias, rng);
    m.color_head = random_dense(primary, 3, Activation::kSigmoid, InputSource::kNone, head_gain, init.bias_std,
                                init.color_bias, rng);
    m.validate();
    return m;
}

int QuantizedModel::skip_width(InputSource s) const {
    switch (s) {
        case InputSource::kNone: return 0;
        case InputSource::kEncodedPosition: return position_pe.encoded_width();
        case InputSource::kEncodedDirection:
            if (!direction_pe) throw std::invalid_argument("layer consumes the encoded direction but the model has none");
            return direction_pe->encoded_width();
    }
    return 0;
}

void QuantizedModel::validate() const {
    if (trunk.empty()) throw std::invalid_argument("model: trunk must have at least one layer");
    position_pe.validate();
    if (direction_pe) direction_pe->validate();
    if (position_pe.mode == PeMode::kR6 && direction_pe)
        throw std::invalid_argument("model: an R6 position encoder already consumes the direction");
    auto sw = [this](const LayerSpec& l) { return skip_width(l.skip_concat); };
    auto in_of = [](const LayerSpec& l) { return l.in_width; };
    auto out_of = [](const LayerSpec& l) { return l.out_width; };
    const int trunk_out = primary_width_check(trunk, position_pe.encoded_width(), sw, in_of, out_of, "trunk");
    const int color_in = primary_width_check(color_branch, trunk_out, sw, in_of, out_of, "color_branch");
    check_head(density_head.in_width, trunk_out, density_head.out_width, 1, "density");
    check_head(color_head.in_width, color_in, color_head.out_width, 3, "color");
    for (const auto& l : trunk) {
        if (l.block != BlockKind::kMonb) throw std::invalid_argument("model: trunk layers run on the MONB");
        l.validate();
    }
    for (const auto& l : color_branch) {
        if (l.block != BlockKind::kMonb) throw std::invalid_argument("model: colour-branch layers run on the MONB");
        l.validate();
    }
    if (density_head.block != BlockKind::kSonb || color_head.block != BlockKind::kSonb)
        throw std::invalid_argument("model: output heads run on the SONB");
    density_head.validate();
    color_head.validate();
}

int QuantizedModel::total_weight_tiles() const {
    int total = density_head.tile_count() + color_head.tile_count();
    for (const auto& l : trunk) total += l.tile_count();
    for (const auto& l : color_branch) total += l.tile_count();
    return total;
}

namespace {

DenseLayer dequantize_layer(const LayerSpec& l) {
    DenseLayer d;
    d.in_width = l.in_width;
    d.out_width = l.out_width;
    d.activation = l.activation;
    d.skip = l.skip_concat;
    d.weight.resize(static_cast<size_t>(l.in_width) * l.out_width);
    for (int r = 0; r < l.out_width; ++r)
        for (int c = 0; c < l.in_width; ++c)
            d.weight[static_cast<size_t>(r) * l.in_width + c] =
                static_cast<float>(std::ldexp(static_cast<double>(l.weight(r, c).value()), -l.w_frac));
    d.bias.resize(static_cast<size_t>(l.out_width));
    for (int r = 0; r < l.out_width; ++r)
        d.bias[r] = static_cast<float>(std::ldexp(static_cast<double>(l.bias[r]), -l.acc_frac()));
    return d;
}

}  // namespace

FloatModel QuantizedModel::dequantized() const {
    FloatModel m;
    m.position_pe = dequantize(position_pe);
    if (direction_pe) m.direction_pe = dequantize(*direction_pe);
    for (const auto& l : trunk) m.trunk.push_back(dequantize_layer(l));
    for (const auto& l : color_branch) m.color_branch.push_back(dequantize_layer(l));
    m.density_head = dequantize_layer(density_head);
    m.color_head = dequantize_layer(color_head);
    return m;
}

}  // namespace icarus
