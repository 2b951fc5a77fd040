#include "icarus/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace icarus {

uint8_t to_byte(double v) {
    if (!(v > 0.0)) return 0;
    if (v >= 1.0) return 255;
    return static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));
}

std::vector<uint8_t> to_bytes(const Image& img) {
    std::vector<uint8_t> out(img.rgb.size());
    std::transform(img.rgb.begin(), img.rgb.end(), out.begin(), to_byte);
    return out;
}

std::string encode_ppm(const Image& img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    const std::vector<uint8_t> bytes = to_bytes(img);
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return out;
}

namespace {

// Reads one header token, skipping whitespace and '#' comments.
std::string ppm_token(const std::string& s, size_t& pos) {
    for (;;) {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos < s.size() && s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    const size_t start = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    return s.substr(start, pos - start);
}

int parse_dim(const std::string& tok) {
    if (tok.empty() || tok.size() > 9 || !std::all_of(tok.begin(), tok.end(), ::isdigit))
        throw ImageError("ppm: bad header field '" + tok + "'");
    return std::stoi(tok);
}

Image from_bytes(int w, int h, const uint8_t* data) {
    Image img(w, h);
    for (size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = data[i] / 255.0;
    return img;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_png(const Image& img, const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = PNG_FORMAT_RGB;
    const std::vector<uint8_t> bytes = to_bytes(img);
    if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr))
        throw ImageError("png: cannot write " + path.string() + ": " + png.message);
}

Image read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw ImageError("png: cannot read " + path.string() + ": " + png.message);
    png.format = PNG_FORMAT_RGB;
    std::vector<uint8_t> buf(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&png);
        throw ImageError("png: cannot decode " + path.string() + ": " + png.message);
    }
    return from_bytes(static_cast<int>(png.width), static_cast<int>(png.height), buf.data());
}

}  // namespace

Image decode_ppm(const std::string& bytes) {
    size_t pos = 0;
    if (ppm_token(bytes, pos) != "P6") throw ImageError("ppm: not a binary P6 file");
    const int w = parse_dim(ppm_token(bytes, pos));
    const int h = parse_dim(ppm_token(bytes, pos));
    if (parse_dim(ppm_token(bytes, pos)) != 255) throw ImageError("ppm: only maxval 255 is supported");
    ++pos;  // single whitespace byte after maxval
    const size_t need = static_cast<size_t>(w) * h * 3;
    if (pos > bytes.size() || bytes.size() - pos < need) throw ImageError("ppm: truncated pixel data");
    return from_bytes(w, h, reinterpret_cast<const uint8_t*>(bytes.data() + pos));
}

ImageFormat format_for(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".png" ? ImageFormat::kPng : ImageFormat::kPpm;
}

void write_image(const Image& img, const std::filesystem::path& path, ImageFormat fmt) {
    if (fmt == ImageFormat::kPng) return write_png(img, path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageError("cannot open " + path.string() + " for writing");
    const std::string data = encode_ppm(img);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw ImageError("write failed: " + path.string());
}

void write_image(const Image& img, const std::filesystem::path& path) { write_image(img, path, format_for(path)); }

Image read_image(const std::filesystem::path& path) {
    const std::string data = slurp(path);
    if (data.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(data.data()), 0, 8) == 0) return read_png(path);
    return decode_ppm(data);
}

double psnr(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) throw std::invalid_argument("psnr: image dimensions differ");
    if (a.rgb.empty()) return kPsnrCap;
    double se = 0.0;
    for (size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = a.rgb[i] - b.rgb[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.rgb.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace icarus
