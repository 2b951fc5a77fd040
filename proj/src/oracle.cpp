#include "icarus/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace icarus {

void ActivationRanges::merge(const ActivationRanges& o) {
    position = std::max(position, o.position);
    if (trunk.size() < o.trunk.size()) trunk.resize(o.trunk.size(), 0.0);
    for (size_t i = 0; i < o.trunk.size(); ++i) trunk[i] = std::max(trunk[i], o.trunk[i]);
    if (color_branch.size() < o.color_branch.size()) color_branch.resize(o.color_branch.size(), 0.0);
    for (size_t i = 0; i < o.color_branch.size(); ++i) color_branch[i] = std::max(color_branch[i], o.color_branch[i]);
    density = std::max(density, o.density);
    samples += o.samples;
}

namespace {

double activate(double v, Activation a) {
    switch (a) {
        case Activation::kNone: return v;
        case Activation::kRelu: return v > 0.0 ? v : 0.0;
        case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-v));
    }
    return v;
}

std::vector<double> dense(const DenseLayer& l, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != l.in_width) throw std::invalid_argument("oracle: layer input width mismatch");
    std::vector<double> y(static_cast<size_t>(l.out_width));
    for (int r = 0; r < l.out_width; ++r) {
        double s = l.bias[r];
        for (int c = 0; c < l.in_width; ++c) s += static_cast<double>(l.w(r, c)) * x[c];
        y[r] = activate(s, l.activation);
    }
    return y;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

OracleShade oracle_forward(const FloatModel& model, const Vec3& position, const Vec3& direction,
                           ActivationRanges* ranges) {
    std::vector<double> pe_in(position.begin(), position.end());
    if (model.position_pe.mode == PeMode::kR6) pe_in.insert(pe_in.end(), direction.begin(), direction.end());
    const std::vector<double> enc_pos = encode_reference(pe_in, model.position_pe);
    std::vector<double> enc_dir;
    if (model.direction_pe) enc_dir = encode_reference(direction, *model.direction_pe);

    auto with_skip = [&](std::vector<double> x, InputSource s) {
        if (s == InputSource::kEncodedPosition) x.insert(x.end(), enc_pos.begin(), enc_pos.end());
        if (s == InputSource::kEncodedDirection) {
            if (!model.direction_pe) throw std::invalid_argument("oracle: model has no direction encoder");
            x.insert(x.end(), enc_dir.begin(), enc_dir.end());
        }
        return x;
    };

    if (ranges) {
        ranges->trunk.resize(std::max(ranges->trunk.size(), model.trunk.size()), 0.0);
        ranges->color_branch.resize(std::max(ranges->color_branch.size(), model.color_branch.size()), 0.0);
        for (double p : position) ranges->position = std::max(ranges->position, std::abs(p));
        ranges->samples += 1;
    }

    std::vector<double> h = enc_pos;
    for (size_t i = 0; i < model.trunk.size(); ++i) {
        const DenseLayer& l = model.trunk[i];
        h = dense(l, with_skip(std::move(h), l.skip));
        if (ranges) ranges->trunk[i] = std::max(ranges->trunk[i], max_abs(h));
    }

    OracleShade out;
    out.sigma = dense(model.density_head, h)[0];
    if (ranges) ranges->density = std::max(ranges->density, out.sigma);

    for (size_t i = 0; i < model.color_branch.size(); ++i) {
        const DenseLayer& l = model.color_branch[i];
        h = dense(l, with_skip(std::move(h), l.skip));
        if (ranges) ranges->color_branch[i] = std::max(ranges->color_branch[i], max_abs(h));
    }
    const std::vector<double> rgb = dense(model.color_head, h);
    for (int k = 0; k < 3; ++k) out.color[k] = rgb[k];
    return out;
}

OracleComposite composite_direct(std::span<const HostShade> samples) {
    OracleComposite r;
    r.weights.resize(samples.size());
    double depth = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double x = samples[i].sigma * samples[i].delta;
        const double w = -std::exp(-depth) * std::expm1(-x);
        r.weights[i] = w;
        for (int k = 0; k < 3; ++k) r.pixel[k] += w * samples[i].color[k];
        depth += x;
    }
    r.transmittance = std::exp(-depth);
    return r;
}

OracleComposite composite_fold(std::span<const HostShade> samples) {
    OracleComposite r;
    r.weights.resize(samples.size());
    double t = 1.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double x = samples[i].sigma * samples[i].delta;
        const double next = t * std::exp(-x);
        const double w = -t * std::expm1(-x);
        r.weights[i] = w;
        for (int k = 0; k < 3; ++k) r.pixel[k] += w * samples[i].color[k];
        t = next;
    }
    r.transmittance = t;
    return r;
}

}  // namespace icarus
