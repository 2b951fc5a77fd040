#include "icarus/traffic.hpp"

#include <stdexcept>

namespace icarus {

TrafficEstimate estimate_traffic(int width, int height, int samples_per_ray, bool pe_on_chip, bool vru_on_chip,
                                 int fine_samples) {
    if (width <= 0 || height <= 0 || samples_per_ray <= 0 || fine_samples <= 0)
        throw std::invalid_argument("estimate_traffic: dimensions and sample counts must be positive");
    const uint64_t rays = static_cast<uint64_t>(width) * static_cast<uint64_t>(height);
    TrafficEstimate t;
    t.input_bytes = rays * static_cast<uint64_t>(samples_per_ray) * (pe_on_chip ? kRawInputValues : kEncodedInputValues) *
                    kBytesPerValue;
    t.output_bytes = vru_on_chip ? rays * kPixelValues * kBytesPerValue
                                 : rays * static_cast<uint64_t>(fine_samples) * kShadeValues * kBytesPerValue;
    return t;
}

double vru_value_ratio(int samples_per_ray) {
    if (samples_per_ray <= 0) throw std::invalid_argument("vru_value_ratio: sample count must be positive");
    return static_cast<double>(kPixelValues) / (static_cast<double>(samples_per_ray) * kShadeValues);
}

namespace {

// Exact integer truncation of bytes / 2^shift to two decimals.
std::string truncated(uint64_t bytes, int shift, const char* unit) {
    const uint64_t whole = bytes >> shift;
    const uint64_t rest = bytes & ((uint64_t{1} << shift) - 1);
    const uint64_t h = whole * 100 + ((rest * 100) >> shift);
    std::string frac = std::to_string(h % 100);
    if (frac.size() < 2) frac.insert(0, "0");
    return std::to_string(h / 100) + "." + frac + " " + unit;
}

}  // namespace

std::string format_gib(uint64_t bytes) { return truncated(bytes, 30, "GiB"); }
std::string format_mib(uint64_t bytes) { return truncated(bytes, 20, "MiB"); }

std::string with_commas(uint64_t v) {
    std::string s = std::to_string(v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<size_t>(i), ",");
    return s;
}

std::vector<TrafficRow> traffic_table(int width, int height, int samples_per_ray, int fine_samples) {
    const TrafficEstimate on = estimate_traffic(width, height, samples_per_ray, true, true, fine_samples);
    const TrafficEstimate off = estimate_traffic(width, height, samples_per_ray, false, false, fine_samples);
    return {
        {"input, encoder on chip", on.input_bytes, format_gib(on.input_bytes)},
        {"input, encoder off chip", off.input_bytes, format_gib(off.input_bytes)},
        {"fine-pass output, renderer off chip", off.output_bytes, format_mib(off.output_bytes)},
        {"fine-pass output, renderer on chip", on.output_bytes, format_mib(on.output_bytes)},
    };
}

}  // namespace icarus
