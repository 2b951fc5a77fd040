#pragma once

// Off-chip data volume of a frame, with and without the on-chip encoder and
// volume renderer.
//
//   encoder on chip:   W H N x 6 values x 2 B (position + direction)
//   encoder off chip:  W H N x 84 values x 2 B (60 + 24 encoded values)
//   renderer off chip: W H N_fine x 4 values x 2 B (rgb + sigma per sample)
//   renderer on chip:  W H x 3 values x 2 B (one pixel per ray)

#include <cstdint>
#include <string>
#include <vector>

namespace icarus {

inline constexpr int kRawInputValues = 6;
inline constexpr int kEncodedInputValues = 60 + 24;
inline constexpr int kShadeValues = 4;
inline constexpr int kPixelValues = 3;
inline constexpr int kBytesPerValue = 2;

struct TrafficEstimate {
    uint64_t input_bytes = 0;
    uint64_t output_bytes = 0;
};

/// Throws std::invalid_argument for non-positive dimensions or counts.
TrafficEstimate estimate_traffic(int width, int height, int samples_per_ray, bool pe_on_chip, bool vru_on_chip,
                                 int fine_samples = 128);

/// Fraction of the per-ray shade values that survive the renderer: 3 / (4 N).
double vru_value_ratio(int samples_per_ray);

/// bytes / 2^30 and bytes / 2^20, truncated (not rounded) to two decimals.
std::string format_gib(uint64_t bytes);
std::string format_mib(uint64_t bytes);
std::string with_commas(uint64_t v);

struct TrafficRow {
    std::string label;
    uint64_t bytes = 0;
    std::string display;  // "1.37 GiB"
};

std::vector<TrafficRow> traffic_table(int width, int height, int samples_per_ray, int fine_samples = 128);

}  // namespace icarus
