#pragma once

// Model containers (.icm) and camera-pose ingestion.
//
// Container layout, all integers little-endian:
//
//   "ICRS" | u16 version (1) | u32 header length | JSON header | tensor blob
//
// The header describes the encoders, the layers and every tensor (name,
// dtype, shape, byte offset and length inside the blob). Tensors are
// row-major with the output dimension first. Float models store f32
// weights and biases; quantized models store each weight as the i16 word
// (sign << 8 | magnitude), padded to the 64-wide tile grid, i32 biases and
// i16 frequency banks.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icarus/camera.hpp"
#include "icarus/model.hpp"

namespace icarus {

inline constexpr uint16_t kContainerVersion = 1;

enum class ModelErrorCode { kIo, kBadMagic, kBadVersion, kMalformedHeader, kShapeMismatch, kNonFinite, kInvalidValue, kInvalidPose };
const char* to_string(ModelErrorCode c);

class ModelError : public std::runtime_error {
public:
    ModelError(ModelErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ModelErrorCode code() const { return code_; }

private:
    ModelErrorCode code_;
};

enum class ModelFormat { kFloat, kQuantized };

std::string serialize(const FloatModel& model);
std::string serialize(const QuantizedModel& model);
ModelFormat container_format(std::string_view bytes);
FloatModel parse_float_model(std::string_view bytes);
QuantizedModel parse_quantized_model(std::string_view bytes);

void save_model(const FloatModel& model, const std::filesystem::path& path);
void save_model(const QuantizedModel& model, const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);  // ModelError(kIo) on failure
ModelFormat model_format(const std::filesystem::path& path);
FloatModel load_float_model(const std::filesystem::path& path);
QuantizedModel load_quantized_model(const std::filesystem::path& path);

/// Cameras from a transforms file: "camera_angle_x" plus "frames", each with
/// a 4x4 "transform_matrix". Every pose is validated (ModelError(kInvalidPose)).
std::vector<Camera> parse_poses(std::string_view json_text, int width, int height, double near, double far);
std::vector<Camera> load_poses(const std::filesystem::path& path, int width, int height, double near, double far);

}  // namespace icarus
