#include "icarus/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace icarus {

using nlohmann::json;

const char* to_string(ModelErrorCode c) {
    switch (c) {
        case ModelErrorCode::kIo: return "io";
        case ModelErrorCode::kBadMagic: return "bad_magic";
        case ModelErrorCode::kBadVersion: return "bad_version";
        case ModelErrorCode::kMalformedHeader: return "malformed_header";
        case ModelErrorCode::kShapeMismatch: return "shape_mismatch";
        case ModelErrorCode::kNonFinite: return "non_finite";
        case ModelErrorCode::kInvalidValue: return "invalid_value";
        case ModelErrorCode::kInvalidPose: return "invalid_pose";
    }
    return "?";
}

namespace {

constexpr char kMagic[4] = {'I', 'C', 'R', 'S'};
constexpr size_t kPreambleBytes = 10;

[[noreturn]] void fail(ModelErrorCode code, const std::string& msg) { throw ModelError(code, msg); }

template <typename T>
void put_le(std::string& out, T v) {
    using U = std::make_unsigned_t<T>;
    U u;
    std::memcpy(&u, &v, sizeof u);
    for (size_t i = 0; i < sizeof u; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (size_t i = 0; i < sizeof u; ++i) u |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
    T v;
    std::memcpy(&v, &u, sizeof v);
    return v;
}

size_t dtype_size(const std::string& dtype) {
    if (dtype == "f32" || dtype == "i32") return 4;
    if (dtype == "i16") return 2;
    fail(ModelErrorCode::kMalformedHeader, "unknown tensor dtype '" + dtype + "'");
}

class BlobWriter {
public:
    void f32(const std::string& name, std::vector<int64_t> shape, std::span<const float> v) {
        begin(name, "f32", std::move(shape), v.size() * 4);
        for (float x : v) put_le(blob_, std::bit_cast<int32_t>(x));
    }
    void i16(const std::string& name, std::vector<int64_t> shape, std::span<const int16_t> v) {
        begin(name, "i16", std::move(shape), v.size() * 2);
        for (int16_t x : v) put_le(blob_, x);
    }
    void i32(const std::string& name, std::vector<int64_t> shape, std::span<const int32_t> v) {
        begin(name, "i32", std::move(shape), v.size() * 4);
        for (int32_t x : v) put_le(blob_, x);
    }

    std::string finish(json header) const {
        header["tensors"] = tensors_;
        const std::string text = header.dump();
        std::string out(kMagic, 4);
        put_le(out, kContainerVersion);
        put_le(out, static_cast<uint32_t>(text.size()));
        out += text;
        out += blob_;
        return out;
    }

private:
    void begin(const std::string& name, const char* dtype, std::vector<int64_t> shape, size_t bytes) {
        tensors_.push_back({{"name", name}, {"dtype", dtype}, {"shape", shape}, {"offset", blob_.size()}, {"bytes", bytes}});
    }

    json tensors_ = json::array();
    std::string blob_;
};

struct TensorInfo {
    std::string dtype;
    std::vector<int64_t> shape;
    size_t offset = 0;
    size_t bytes = 0;
};

class BlobReader {
public:
    BlobReader(const json& header, std::string_view blob) : blob_(blob) {
        std::vector<std::pair<size_t, size_t>> spans;
        for (const json& t : header.at("tensors")) {
            TensorInfo info;
            info.dtype = t.at("dtype").get<std::string>();
            info.shape = t.at("shape").get<std::vector<int64_t>>();
            info.offset = t.at("offset").get<size_t>();
            info.bytes = t.at("bytes").get<size_t>();
            size_t count = 1;
            for (int64_t d : info.shape) {
                if (d < 0) fail(ModelErrorCode::kShapeMismatch, "negative tensor dimension");
                count *= static_cast<size_t>(d);
            }
            if (count * dtype_size(info.dtype) != info.bytes)
                fail(ModelErrorCode::kShapeMismatch, "tensor byte length does not match its shape");
            spans.emplace_back(info.offset, info.bytes);
            const std::string name = t.at("name").get<std::string>();
            if (!tensors_.emplace(name, std::move(info)).second)
                fail(ModelErrorCode::kMalformedHeader, "duplicate tensor '" + name + "'");
        }
        std::sort(spans.begin(), spans.end());
        size_t end = 0;
        for (auto [off, len] : spans) {
            if (off != end) fail(ModelErrorCode::kShapeMismatch, "tensors do not tile the blob contiguously");
            end += len;
        }
        if (end != blob_.size())
            fail(ModelErrorCode::kShapeMismatch, "blob holds " + std::to_string(blob_.size()) + " bytes, tensors declare " +
                                                     std::to_string(end));
    }

    std::vector<float> f32(const std::string& name, std::vector<int64_t> shape) const {
        const auto [p, n] = locate(name, "f32", shape);
        std::vector<float> v(n);
        for (size_t i = 0; i < n; ++i) {
            v[i] = std::bit_cast<float>(get_le<int32_t>(p + 4 * i));
            if (!std::isfinite(v[i])) fail(ModelErrorCode::kNonFinite, "tensor '" + name + "' has non-finite values");
        }
        return v;
    }
    std::vector<int16_t> i16(const std::string& name, std::vector<int64_t> shape) const {
        const auto [p, n] = locate(name, "i16", shape);
        std::vector<int16_t> v(n);
        for (size_t i = 0; i < n; ++i) v[i] = get_le<int16_t>(p + 2 * i);
        return v;
    }
    std::vector<int32_t> i32(const std::string& name, std::vector<int64_t> shape) const {
        const auto [p, n] = locate(name, "i32", shape);
        std::vector<int32_t> v(n);
        for (size_t i = 0; i < n; ++i) v[i] = get_le<int32_t>(p + 4 * i);
        return v;
    }

private:
    std::pair<const unsigned char*, size_t> locate(const std::string& name, const char* dtype,
                                                   const std::vector<int64_t>& shape) const {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) fail(ModelErrorCode::kMalformedHeader, "missing tensor '" + name + "'");
        if (it->second.dtype != dtype) fail(ModelErrorCode::kMalformedHeader, "tensor '" + name + "' has the wrong dtype");
        if (it->second.shape != shape) fail(ModelErrorCode::kShapeMismatch, "tensor '" + name + "' has the wrong shape");
        return {reinterpret_cast<const unsigned char*>(blob_.data()) + it->second.offset, it->second.bytes / dtype_size(dtype)};
    }

    std::string_view blob_;
    std::map<std::string, TensorInfo> tensors_;
};

struct Container {
    json header;
    std::string_view blob;
};

Container split(std::string_view bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) fail(ModelErrorCode::kBadMagic, "not an ICRS container");
    if (bytes.size() < kPreambleBytes) fail(ModelErrorCode::kMalformedHeader, "truncated container preamble");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const uint16_t version = get_le<uint16_t>(p + 4);
    if (version != kContainerVersion) fail(ModelErrorCode::kBadVersion, "unsupported container version " + std::to_string(version));
    const uint32_t header_len = get_le<uint32_t>(p + 6);
    if (bytes.size() - kPreambleBytes < header_len) fail(ModelErrorCode::kMalformedHeader, "truncated header");
    Container c;
    try {
        c.header = json::parse(bytes.substr(kPreambleBytes, header_len));
    } catch (const json::exception& e) {
        fail(ModelErrorCode::kMalformedHeader, std::string("header is not valid JSON: ") + e.what());
    }
    if (!c.header.is_object()) fail(ModelErrorCode::kMalformedHeader, "header is not a JSON object");
    c.blob = bytes.substr(kPreambleBytes + header_len);
    return c;
}

// --- float models ---------------------------------------------------------

json float_encoder_header(const FrequencySpec& pe, const std::string& tensor, BlobWriter& w) {
    json j{{"kind", to_string(pe.kind)}, {"mode", to_string(pe.mode)}, {"features", pe.features}};
    if (pe.kind == PeKind::kNerf) {
        j["num_frequencies"] = pe.features / 3;
    } else {
        std::vector<float> a(pe.a.begin(), pe.a.end());
        w.f32(tensor, {pe.rows(), pe.features}, a);
        j["tensor"] = tensor;
    }
    return j;
}

FrequencySpec float_encoder(const json& j, const BlobReader& r) {
    FrequencySpec pe;
    pe.kind = pe_kind_from_string(j.at("kind").get<std::string>());
    pe.mode = pe_mode_from_string(j.at("mode").get<std::string>());
    if (pe.kind == PeKind::kNerf) {
        if (pe.mode != PeMode::kR3) fail(ModelErrorCode::kInvalidValue, "NeRF encoders are R3 only");
        return build_nerf_frequencies(j.at("num_frequencies").get<int>());
    }
    pe.features = j.at("features").get<int>();
    if (pe.features < 1 || pe.features > kBankCapacity) fail(ModelErrorCode::kInvalidValue, "encoder feature count out of range");
    const std::vector<float> a = r.f32(j.at("tensor").get<std::string>(), {pe.rows(), pe.features});
    pe.a.assign(a.begin(), a.end());
    return pe;
}

json float_layer_header(const DenseLayer& l, const std::string& name, const std::string& group, BlobWriter& w) {
    w.f32(name + ".weight", {l.out_width, l.in_width}, l.weight);
    w.f32(name + ".bias", {l.out_width}, l.bias);
    return {{"name", name},     {"group", group},
            {"in", l.in_width}, {"out", l.out_width},
            {"activation", to_string(l.activation)}, {"skip", to_string(l.skip)}};
}

DenseLayer float_layer(const json& j, const BlobReader& r) {
    DenseLayer l;
    l.in_width = j.at("in").get<int>();
    l.out_width = j.at("out").get<int>();
    if (l.in_width <= 0 || l.out_width <= 0) fail(ModelErrorCode::kShapeMismatch, "layer widths must be positive");
    l.activation = activation_from_string(j.at("activation").get<std::string>());
    l.skip = input_source_from_string(j.at("skip").get<std::string>());
    const std::string name = j.at("name").get<std::string>();
    l.weight = r.f32(name + ".weight", {l.out_width, l.in_width});
    l.bias = r.f32(name + ".bias", {l.out_width});
    return l;
}

// --- quantized models -----------------------------------------------------

json fixed_encoder_header(const FrequencyMatrix& m, const std::string& name, BlobWriter& w) {
    w.i16(name + ".bank0", {3, m.features}, m.bank0);
    if (m.mode == PeMode::kR6) w.i16(name + ".bank1", {3, m.features}, m.bank1);
    return {{"kind", to_string(m.kind)}, {"mode", to_string(m.mode)}, {"features", m.features},
            {"frac", m.fmt.frac_bits},   {"tensor", name}};
}

FrequencyMatrix fixed_encoder(const json& j, const BlobReader& r) {
    const PeKind kind = pe_kind_from_string(j.at("kind").get<std::string>());
    const PeMode mode = pe_mode_from_string(j.at("mode").get<std::string>());
    const int features = j.at("features").get<int>();
    const int frac = j.at("frac").get<int>();
    if (features < 1 || features > kBankCapacity) fail(ModelErrorCode::kInvalidValue, "encoder feature count out of range");
    if (frac < 0 || frac > 15) fail(ModelErrorCode::kInvalidValue, "encoder frac bits out of range");
    const std::string name = j.at("tensor").get<std::string>();
    std::vector<int16_t> bank0 = r.i16(name + ".bank0", {3, features});
    std::vector<int16_t> bank1;
    if (mode == PeMode::kR6) bank1 = r.i16(name + ".bank1", {3, features});
    return make_frequency_matrix(kind, mode, features, QFormat{frac}, std::move(bank0), std::move(bank1));
}

json fixed_layer_header(const LayerSpec& l, const std::string& name, const std::string& group, BlobWriter& w) {
    std::vector<int16_t> codes(l.weights.size());
    std::transform(l.weights.begin(), l.weights.end(), codes.begin(),
                   [](const WeightCode& c) { return c.bits(); });
    w.i16(name + ".weight", {l.rows(), l.in_padded()}, codes);
    w.i32(name + ".bias", {l.out_width}, l.bias);
    return {{"name", name},
            {"group", group},
            {"block", l.block == BlockKind::kMonb ? "monb" : "sonb"},
            {"in", l.in_width},
            {"out", l.out_width},
            {"activation", to_string(l.activation)},
            {"skip", to_string(l.skip_concat)},
            {"in_frac", l.in_frac},
            {"w_frac", l.w_frac},
            {"out_frac", l.out_frac}};
}

LayerSpec fixed_layer(const json& j, const BlobReader& r) {
    LayerSpec l;
    const std::string block = j.at("block").get<std::string>();
    if (block != "monb" && block != "sonb") fail(ModelErrorCode::kMalformedHeader, "unknown block '" + block + "'");
    l.block = block == "monb" ? BlockKind::kMonb : BlockKind::kSonb;
    l.in_width = j.at("in").get<int>();
    l.out_width = j.at("out").get<int>();
    if (l.in_width <= 0 || l.out_width <= 0 || (l.block == BlockKind::kSonb && l.out_width > kMaxSonbRows))
        fail(ModelErrorCode::kShapeMismatch, "layer widths out of range");
    l.activation = activation_from_string(j.at("activation").get<std::string>());
    l.skip_concat = input_source_from_string(j.at("skip").get<std::string>());
    l.in_frac = j.at("in_frac").get<int>();
    l.w_frac = j.at("w_frac").get<int>();
    l.out_frac = j.at("out_frac").get<int>();
    const std::string name = j.at("name").get<std::string>();
    const std::vector<int16_t> codes = r.i16(name + ".weight", {l.rows(), l.in_padded()});
    l.weights.resize(codes.size());
    for (size_t i = 0; i < codes.size(); ++i) {
        try {
            l.weights[i] = weight_from_bits(codes[i]);
        } catch (const std::exception& e) {
            fail(ModelErrorCode::kInvalidValue, "tensor '" + name + ".weight': " + e.what());
        }
    }
    l.bias = r.i32(name + ".bias", {l.out_width});
    try {
        l.validate();
    } catch (const std::invalid_argument& e) {
        fail(ModelErrorCode::kInvalidValue, name + ": " + e.what());
    }
    return l;
}

template <typename Fn>
auto header_guard(Fn&& fn) {
    try {
        return fn();
    } catch (const ModelError&) {
        throw;
    } catch (const json::exception& e) {
        fail(ModelErrorCode::kMalformedHeader, std::string("header: ") + e.what());
    } catch (const std::invalid_argument& e) {
        fail(ModelErrorCode::kInvalidValue, e.what());
    } catch (const std::out_of_range& e) {
        fail(ModelErrorCode::kInvalidValue, e.what());
    }
}

void expect_format(const json& header, const char* format) {
    const auto it = header.find("format");
    if (it == header.end() || !it->is_string()) fail(ModelErrorCode::kMalformedHeader, "header lacks a format field");
    if (it->get<std::string>() != format)
        fail(ModelErrorCode::kMalformedHeader, "expected a " + std::string(format) + " model, got " + it->get<std::string>());
}

template <typename Layer, typename Emit>
json layer_list(const Layer& density, const Layer& color, const std::vector<Layer>& trunk,
                const std::vector<Layer>& branch, Emit emit) {
    json layers = json::array();
    for (size_t i = 0; i < trunk.size(); ++i) layers.push_back(emit(trunk[i], "trunk." + std::to_string(i), "trunk"));
    layers.push_back(emit(density, "density_head", "density_head"));
    for (size_t i = 0; i < branch.size(); ++i)
        layers.push_back(emit(branch[i], "color_branch." + std::to_string(i), "color_branch"));
    layers.push_back(emit(color, "color_head", "color_head"));
    return layers;
}

template <typename Layer, typename Model, typename Parse>
void read_layers(const json& header, const BlobReader& r, Model& m, Parse parse) {
    bool have_density = false, have_color = false;
    for (const json& j : header.at("layers")) {
        const std::string group = j.at("group").get<std::string>();
        Layer l = parse(j, r);
        if (group == "trunk") {
            m.trunk.push_back(std::move(l));
        } else if (group == "color_branch") {
            m.color_branch.push_back(std::move(l));
        } else if (group == "density_head") {
            m.density_head = std::move(l);
            have_density = true;
        } else if (group == "color_head") {
            m.color_head = std::move(l);
            have_color = true;
        } else {
            fail(ModelErrorCode::kMalformedHeader, "unknown layer group '" + group + "'");
        }
    }
    if (!have_density || !have_color) fail(ModelErrorCode::kMalformedHeader, "model lacks an output head");
}

void write_file(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ModelErrorCode::kIo, "cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) fail(ModelErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace

std::string serialize(const FloatModel& model) {
    model.validate();
    BlobWriter w;
    json header{{"format", "float"}};
    header["position_encoding"] = float_encoder_header(model.position_pe, "pe.position", w);
    header["direction_encoding"] = model.direction_pe ? float_encoder_header(*model.direction_pe, "pe.direction", w) : json();
    header["layers"] = layer_list(model.density_head, model.color_head, model.trunk, model.color_branch,
                                  [&](const DenseLayer& l, const std::string& name, const char* group) {
                                      return float_layer_header(l, name, group, w);
                                  });
    return w.finish(std::move(header));
}

std::string serialize(const QuantizedModel& model) {
    model.validate();
    BlobWriter w;
    json header{{"format", "quantized"}};
    header["position_encoding"] = fixed_encoder_header(model.position_pe, "pe.position", w);
    header["direction_encoding"] = model.direction_pe ? fixed_encoder_header(*model.direction_pe, "pe.direction", w) : json();
    header["position_frac"] = model.position_fmt.frac_bits;
    header["direction_frac"] = model.direction_fmt.frac_bits;
    header["layers"] = layer_list(model.density_head, model.color_head, model.trunk, model.color_branch,
                                  [&](const LayerSpec& l, const std::string& name, const char* group) {
                                      return fixed_layer_header(l, name, group, w);
                                  });
    return w.finish(std::move(header));
}

ModelFormat container_format(std::string_view bytes) {
    const Container c = split(bytes);
    return header_guard([&] {
        const std::string f = c.header.at("format").get<std::string>();
        if (f == "float") return ModelFormat::kFloat;
        if (f == "quantized") return ModelFormat::kQuantized;
        fail(ModelErrorCode::kMalformedHeader, "unknown model format '" + f + "'");
    });
}

FloatModel parse_float_model(std::string_view bytes) {
    const Container c = split(bytes);
    return header_guard([&] {
        expect_format(c.header, "float");
        const BlobReader r(c.header, c.blob);
        FloatModel m;
        m.position_pe = float_encoder(c.header.at("position_encoding"), r);
        const json& dir = c.header.at("direction_encoding");
        if (!dir.is_null()) m.direction_pe = float_encoder(dir, r);
        read_layers<DenseLayer>(c.header, r, m, float_layer);
        try {
            m.validate();
        } catch (const std::invalid_argument& e) {
            fail(ModelErrorCode::kShapeMismatch, e.what());
        }
        return m;
    });
}

QuantizedModel parse_quantized_model(std::string_view bytes) {
    const Container c = split(bytes);
    return header_guard([&] {
        expect_format(c.header, "quantized");
        const BlobReader r(c.header, c.blob);
        QuantizedModel m;
        m.position_pe = fixed_encoder(c.header.at("position_encoding"), r);
        const json& dir = c.header.at("direction_encoding");
        if (!dir.is_null()) m.direction_pe = fixed_encoder(dir, r);
        const int pf = c.header.at("position_frac").get<int>();
        const int df = c.header.at("direction_frac").get<int>();
        if (pf < 0 || pf > 15 || df < 0 || df > 15) fail(ModelErrorCode::kInvalidValue, "input frac bits out of range");
        m.position_fmt = QFormat{pf};
        m.direction_fmt = QFormat{df};
        read_layers<LayerSpec>(c.header, r, m, fixed_layer);
        try {
            m.validate();
        } catch (const std::invalid_argument& e) {
            fail(ModelErrorCode::kShapeMismatch, e.what());
        }
        return m;
    });
}

void save_model(const FloatModel& model, const std::filesystem::path& path) { write_file(path, serialize(model)); }
void save_model(const QuantizedModel& model, const std::filesystem::path& path) { write_file(path, serialize(model)); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ModelErrorCode::kIo, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail(ModelErrorCode::kIo, "read failed: " + path.string());
    return ss.str();
}

ModelFormat model_format(const std::filesystem::path& path) { return container_format(read_file(path)); }
FloatModel load_float_model(const std::filesystem::path& path) { return parse_float_model(read_file(path)); }
QuantizedModel load_quantized_model(const std::filesystem::path& path) { return parse_quantized_model(read_file(path)); }

std::vector<Camera> parse_poses(std::string_view json_text, int width, int height, double near, double far) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ModelErrorCode::kInvalidPose, std::string("poses: invalid JSON: ") + e.what());
    }
    std::vector<Camera> cams;
    try {
        const double fov = j.at("camera_angle_x").get<double>();
        for (const json& frame : j.at("frames")) {
            const json& m = frame.at("transform_matrix");
            if (!m.is_array() || m.size() != 4) fail(ModelErrorCode::kInvalidPose, "poses: transform_matrix must be 4x4");
            Camera cam;
            for (int r = 0; r < 4; ++r) {
                if (!m[r].is_array() || m[r].size() != 4) fail(ModelErrorCode::kInvalidPose, "poses: transform_matrix must be 4x4");
                for (int c = 0; c < 4; ++c) cam.camera_to_world[static_cast<size_t>(r) * 4 + c] = m[r][c].get<double>();
            }
            cam.fov_x = fov;
            cam.width = width;
            cam.height = height;
            cam.near = near;
            cam.far = far;
            cam.validate();
            cams.push_back(cam);
        }
    } catch (const ModelError&) {
        throw;
    } catch (const std::exception& e) {
        fail(ModelErrorCode::kInvalidPose, std::string("poses: ") + e.what());
    }
    return cams;
}

std::vector<Camera> load_poses(const std::filesystem::path& path, int width, int height, double near, double far) {
    return parse_poses(read_file(path), width, height, near, far);
}

}  // namespace icarus
