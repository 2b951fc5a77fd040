#pragma once

// RGB images with channels in [0, 1], and their PPM / PNG encodings.
//
// Quantization to 8 bits: byte = floor(clamp(v, 0, 1) * 255 + 0.5), so the
// 127.5 tie of v = 0.5 goes up to 128.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace icarus {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;  // row-major, 3 channels

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0.0) {}

    double& at(int x, int y, int c) { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ImageFormat { kPpm, kPng };

uint8_t to_byte(double v);
std::vector<uint8_t> to_bytes(const Image& img);

std::string encode_ppm(const Image& img);
Image decode_ppm(const std::string& bytes);

/// Picks the format from the extension (.png, anything else PPM).
ImageFormat format_for(const std::filesystem::path& path);

void write_image(const Image& img, const std::filesystem::path& path, ImageFormat fmt);
void write_image(const Image& img, const std::filesystem::path& path);
/// Reads binary PPM (P6, maxval 255) or PNG, detected from the file contents.
Image read_image(const std::filesystem::path& path);

/// 10 log10(1 / MSE) over all channels; identical images give 99.0.
/// Throws std::invalid_argument when dimensions differ.
double psnr(const Image& a, const Image& b);
inline constexpr double kPsnrCap = 99.0;

}  // namespace icarus
