// icarus: command-line front end of the plenoptic-core simulator.
//
//   icarus random-model --out m.icm [--topology small|nerf] ...
//   icarus quantize float.icm out.icm [--poses transforms.json ...]
//   icarus render model.icm --out img.ppm [--poses transforms.json] [--mode exact|approx|float] ...
//   icarus psnr a.ppm b.ppm
//   icarus verify-rmcm
//   icarus stats 800 800 192
//   icarus orbit-poses --out transforms.json
//
// Exit codes: 0 ok, 2 bad arguments, 3 malformed model or pose file,
// 4 verification failure, 5 I/O error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "icarus/image.hpp"
#include "icarus/model_io.hpp"
#include "icarus/quantizer.hpp"
#include "icarus/render.hpp"
#include "icarus/rmcm.hpp"
#include "icarus/traffic.hpp"

using namespace icarus;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kBadArgs = 2, kBadModel = 3, kVerifyFailed = 4, kIoError = 5 };

struct SceneArgs {
    std::string poses;
    int frame = 0;
    int width = 64;
    int height = 64;
    double near = 2.0;
    double far = 6.0;
    double fov = 0.6911112070083618;
    int coarse = 64;
    int fine = 128;
    uint64_t seed = 0;
    bool no_jitter = false;
    int workers = 1;
    int batch_size = kBatchSize;
};

void add_scene_options(CLI::App* cmd, SceneArgs& a) {
    cmd->add_option("--poses", a.poses, "transforms file (camera_angle_x + frames[].transform_matrix)");
    cmd->add_option("--frame", a.frame, "frame index inside the poses file")->check(CLI::NonNegativeNumber);
    cmd->add_option("--width", a.width, "image width")->check(CLI::PositiveNumber);
    cmd->add_option("--height", a.height, "image height")->check(CLI::PositiveNumber);
    cmd->add_option("--near", a.near, "near bound");
    cmd->add_option("--far", a.far, "far bound");
    cmd->add_option("--fov", a.fov, "horizontal field of view in radians (default camera only)");
    cmd->add_option("--coarse", a.coarse, "stratified samples per ray")->check(CLI::PositiveNumber);
    cmd->add_option("--fine", a.fine, "importance samples per ray (0 disables the second pass)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", a.seed, "sampling seed");
    cmd->add_flag("--no-jitter", a.no_jitter, "stratum midpoints and fixed quantiles instead of random draws");
    cmd->add_option("--workers", a.workers, "render threads")->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", a.batch_size, "samples per core batch (128; smaller is a diagnostic)")
        ->check(CLI::PositiveNumber);
}

RenderSettings settings_from(const SceneArgs& a) {
    RenderSettings s;
    s.coarse_samples = a.coarse;
    s.fine_samples = a.fine;
    s.seed = a.seed;
    s.jitter = !a.no_jitter;
    s.workers = a.workers;
    s.batch_size = a.batch_size;
    return s;
}

Camera default_camera(const SceneArgs& a) {
    Camera cam;
    cam.camera_to_world = look_at({0.0, -4.0, 1.0}, {0.0, 0.0, 0.0});
    cam.fov_x = a.fov;
    cam.width = a.width;
    cam.height = a.height;
    cam.near = a.near;
    cam.far = a.far;
    return cam;
}

std::vector<Camera> scene_cameras(const SceneArgs& a) {
    if (a.poses.empty()) return {default_camera(a)};
    return load_poses(a.poses, a.width, a.height, a.near, a.far);
}

json counters_json(const PerfCounters& c) {
    return {{"weight_tile_loads", c.weight_tile_loads},
            {"input_mem_reads", c.input_mem_reads},
            {"act_mem_reads", c.act_mem_reads},
            {"act_mem_writes", c.act_mem_writes},
            {"dram_bytes_in", c.dram_bytes_in},
            {"dram_bytes_out", c.dram_bytes_out},
            {"sampler_feedback_bytes", c.sampler_feedback_bytes},
            {"multiplies_exact", c.multiplies_exact},
            {"multiplies_approx", c.multiplies_approx},
            {"sonb_multiplies", c.sonb_multiplies},
            {"zero_gated_products", c.zero_gated_products},
            {"accumulator_saturations", c.accumulator_saturations},
            {"output_saturations", c.output_saturations},
            {"input_saturations", c.input_saturations},
            {"pe_encodes", c.pe_encodes},
            {"pe_bank0_reads", c.pe_bank0_reads},
            {"pe_bank1_reads", c.pe_bank1_reads},
            {"cordic_ops", c.cordic_ops},
            {"vru_steps", c.vru_steps},
            {"samples", c.samples},
            {"padded_samples", c.padded_samples},
            {"batches", c.batches},
            {"pixels", c.pixels}};
}

void print_counters(const PerfCounters& c) {
    const json j = counters_json(c);
    for (const auto& [k, v] : j.items()) std::printf("  %-24s %s\n", k.c_str(), with_commas(v.get<uint64_t>()).c_str());
}

// --- random-model -----------------------------------------------------------

struct RandomModelArgs {
    std::string out;
    std::string topology = "small";
    int layers = 4;
    int width = 64;
    int pos_freqs = 4;
    int dir_freqs = 2;
    uint64_t seed = 1;
    double weight_gain = 1.0;
    double density_bias = 0.0;
};

int cmd_random_model(const RandomModelArgs& a) {
    const Topology t = a.topology == "nerf" ? nerf_topology() : small_topology(a.layers, a.width, a.pos_freqs, a.dir_freqs);
    RandomInit init;
    init.weight_gain = a.weight_gain;
    init.density_bias = a.density_bias;
    const FloatModel m = random_model(t, a.seed, init);
    save_model(m, a.out);
    std::printf("wrote %s (%zu trunk layers, %zu colour layers)\n", a.out.c_str(), m.trunk.size(), m.color_branch.size());
    return kOk;
}

// --- quantize ---------------------------------------------------------------

int cmd_quantize(const std::string& in, const std::string& out, const SceneArgs& scene, bool calibrate_on_poses, bool as_json) {
    const FloatModel fm = load_float_model(in);
    QuantizationReport report;
    std::optional<ActivationRanges> ranges;
    std::vector<Camera> cams;
    const RenderSettings s = settings_from(scene);
    if (calibrate_on_poses) {
        cams = scene_cameras(scene);
        ranges = calibrate(fm, cams, s);
    }
    const QuantizedModel qm = quantize_model(fm, ranges ? &*ranges : nullptr, &report);
    save_model(qm, out);

    uint64_t saturations = 0;
    if (ranges) {
        for (const Camera& cam : cams) {
            const PerfCounters c = render_fixed(qm, cam, MultiplierMode::kExact, s).counters;
            saturations += c.accumulator_saturations + c.output_saturations;
        }
    }

    if (as_json) {
        json layers = json::array();
        for (const LayerQuantReport& l : report.layers)
            layers.push_back({{"name", l.name}, {"in_frac", l.in_frac}, {"w_frac", l.w_frac}, {"out_frac", l.out_frac},
                              {"max_abs_weight", l.max_abs_weight}, {"observed_max", l.observed_max},
                              {"max_weight_error", l.max_weight_error}, {"clipped_biases", l.clipped_biases}});
        json j{{"output", out},
               {"calibrated", report.calibrated},
               {"position_frac", report.position_frac},
               {"layers", layers}};
        if (ranges) j["saturations"] = saturations;
        std::cout << j.dump(2) << "\n";
        return kOk;
    }
    std::printf("wrote %s (%s)\n", out.c_str(), report.calibrated ? "calibrated" : "default formats");
    std::printf("position Q%d.%d, encoder banks frac %d", 15 - report.position_frac, report.position_frac,
                report.position_pe_frac);
    if (fm.direction_pe) std::printf(" / %d", report.direction_pe_frac);
    std::printf("\n%-16s %7s %6s %8s %10s %12s\n", "layer", "in_frac", "w_frac", "out_frac", "max|w|", "observed");
    for (const LayerQuantReport& l : report.layers)
        std::printf("%-16s %7d %6d %8d %10.4f %12.4f\n", l.name.c_str(), l.in_frac, l.w_frac, l.out_frac, l.max_abs_weight,
                    l.observed_max);
    if (ranges) std::printf("saturation count over calibration renders: %llu\n", static_cast<unsigned long long>(saturations));
    return kOk;
}

// --- render -----------------------------------------------------------------

int cmd_render(const std::string& model_path, const std::string& coarse_path, const std::string& out,
               const std::string& mode_name, const SceneArgs& scene, bool as_json) {
    const RenderMode mode = render_mode_from_string(mode_name);
    const std::vector<Camera> cams = scene_cameras(scene);
    if (scene.frame >= static_cast<int>(cams.size())) throw std::invalid_argument("--frame is past the end of the poses file");
    const Camera& cam = cams[static_cast<size_t>(scene.frame)];
    const RenderSettings s = settings_from(scene);

    auto load_fixed = [](const std::string& p) {
        return model_format(p) == ModelFormat::kQuantized ? load_quantized_model(p) : quantize_model(load_float_model(p));
    };
    auto load_float = [](const std::string& p) {
        return model_format(p) == ModelFormat::kFloat ? load_float_model(p) : load_quantized_model(p).dequantized();
    };

    const auto start = std::chrono::steady_clock::now();
    Image img;
    std::optional<PerfCounters> counters;
    if (mode == RenderMode::kFloat) {
        const FloatModel m = load_float(model_path);
        std::optional<FloatModel> coarse;
        if (!coarse_path.empty()) coarse = load_float(coarse_path);
        img = render_float(m, cam, s, coarse ? &*coarse : nullptr);
    } else {
        const QuantizedModel m = load_fixed(model_path);
        std::optional<QuantizedModel> coarse;
        if (!coarse_path.empty()) coarse = load_fixed(coarse_path);
        RenderResult r = render_fixed(m, cam, mode == RenderMode::kExact ? MultiplierMode::kExact : MultiplierMode::kApprox, s,
                                      coarse ? &*coarse : nullptr);
        img = std::move(r.image);
        counters = r.counters;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_image(img, out);

    if (as_json) {
        json j{{"output", out}, {"mode", to_string(mode)}, {"width", img.width}, {"height", img.height},
               {"seed", scene.seed}, {"workers", scene.workers}, {"seconds", seconds}};
        if (counters) j["counters"] = counters_json(*counters);
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("wrote %s (%dx%d, %s, %.2f s)\n", out.c_str(), img.width, img.height, to_string(mode), seconds);
        if (counters) print_counters(*counters);
    }
    return kOk;
}

// --- psnr / verify / stats -----------------------------------------------------

int cmd_psnr(const std::string& a, const std::string& b, bool as_json) {
    const double db = psnr(read_image(a), read_image(b));
    if (as_json)
        std::cout << json{{"a", a}, {"b", b}, {"psnr_db", db}}.dump(2) << "\n";
    else
        std::printf("%.2f\n", db);
    return kOk;
}

int cmd_verify_rmcm(bool as_json) {
    const RmcmSweep r = sweep_rmcm();
    const int64_t g = std::gcd(r.worst_err, r.worst_ref);
    const int64_t num = r.worst_err / g, den = r.worst_ref / g;
    const bool ok = r.exact_matches == r.cases && r.bound_violations == 0 && num * 9 == den;
    if (as_json) {
        std::cout << json{{"cases", r.cases},
                          {"exact_matches", r.exact_matches},
                          {"bound_violations", r.bound_violations},
                          {"approx_max_rel_err", std::to_string(num) + "/" + std::to_string(den)},
                          {"worst_case", {{"x", r.worst_x}, {"w", r.worst_w}}},
                          {"ok", ok}}
                         .dump(2)
                  << "\n";
    } else {
        std::printf("exact: %s/%s %s; approx max rel err = %lld/%lld (x=%d, w=%d), bound violations %llu\n",
                    with_commas(r.exact_matches).c_str(), with_commas(r.cases).c_str(),
                    r.exact_matches == r.cases ? "OK" : "MISMATCH", static_cast<long long>(num), static_cast<long long>(den),
                    r.worst_x, r.worst_w, static_cast<unsigned long long>(r.bound_violations));
    }
    return ok ? kOk : kVerifyFailed;
}

int cmd_stats(int width, int height, int samples, int fine, bool as_json) {
    const std::vector<TrafficRow> rows = traffic_table(width, height, samples, fine);
    const double ratio = vru_value_ratio(fine);
    if (as_json) {
        json j = json::array();
        for (const TrafficRow& r : rows) j.push_back({{"label", r.label}, {"bytes", r.bytes}, {"display", r.display}});
        std::cout << json{{"rows", j}, {"vru_value_ratio", ratio}}.dump(2) << "\n";
        return kOk;
    }
    for (const TrafficRow& r : rows)
        std::printf("%-38s %20s B  %s\n", r.label.c_str(), with_commas(r.bytes).c_str(), r.display.c_str());
    std::printf("%-38s %20s    %.4f%%\n", "renderer output / input values", ("3/(" + std::to_string(fine) + "x4)").c_str(),
                100.0 * ratio);
    return kOk;
}

int cmd_orbit_poses(const std::string& out, int count, double radius, double height, double fov) {
    json frames = json::array();
    for (int i = 0; i < count; ++i) {
        const double a = 2.0 * std::numbers::pi * i / count;
        const auto m = look_at({radius * std::sin(a), -radius * std::cos(a), height}, {0, 0, 0});
        json rows = json::array();
        for (int r = 0; r < 4; ++r) rows.push_back({m[r * 4], m[r * 4 + 1], m[r * 4 + 2], m[r * 4 + 3]});
        frames.push_back({{"transform_matrix", rows}});
    }
    std::ofstream f(out);
    if (!f) throw ModelError(ModelErrorCode::kIo, "cannot open " + out + " for writing");
    f << json{{"camera_angle_x", fov}, {"frames", frames}}.dump(2) << "\n";
    if (!f) throw ModelError(ModelErrorCode::kIo, "write failed: " + out);
    std::printf("wrote %s (%d frames)\n", out.c_str(), count);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bit-accurate simulator of a fixed-point neural radiance field core"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "machine-readable output");

    RandomModelArgs rm;
    auto* c_rm = app.add_subcommand("random-model", "write a randomly initialised float model");
    c_rm->add_option("--out", rm.out, "output .icm")->required();
    c_rm->add_option("--topology", rm.topology, "small or nerf")->check(CLI::IsMember({"small", "nerf"}));
    c_rm->add_option("--layers", rm.layers, "trunk depth (small)")->check(CLI::PositiveNumber);
    c_rm->add_option("--width", rm.width, "layer width (small)")->check(CLI::PositiveNumber);
    c_rm->add_option("--pos-freqs", rm.pos_freqs, "position frequencies L (small)")->check(CLI::Range(1, 42));
    c_rm->add_option("--dir-freqs", rm.dir_freqs, "direction frequencies L, 0 for none (small)")->check(CLI::Range(0, 42));
    c_rm->add_option("--seed", rm.seed, "initialisation seed");
    c_rm->add_option("--weight-gain", rm.weight_gain, "multiplier on the He-normal std dev");
    c_rm->add_option("--density-bias", rm.density_bias, "mean of the density head bias");

    std::string q_in, q_out;
    SceneArgs q_scene;
    q_scene.fine = 0;
    auto* c_q = app.add_subcommand("quantize", "post-training quantization of a float model");
    c_q->add_option("float_model", q_in, "input float .icm")->required();
    c_q->add_option("output", q_out, "output quantized .icm")->required();
    add_scene_options(c_q, q_scene);
    bool q_calibrate = false;
    c_q->add_flag("--calibrate", q_calibrate, "calibrate activation formats on the default camera (implied by --poses)");

    std::string r_model, r_coarse, r_out, r_mode = "exact";
    SceneArgs r_scene;
    auto* c_r = app.add_subcommand("render", "render one frame");
    c_r->add_option("model", r_model, "float or quantized .icm (float models are quantized with default formats)")->required();
    c_r->add_option("--coarse-model", r_coarse, "separate model for the coarse pass");
    c_r->add_option("--out", r_out, "output image (.ppm or .png)")->required();
    c_r->add_option("--mode", r_mode, "exact, approx or float")->check(CLI::IsMember({"exact", "approx", "float", "float-oracle"}));
    add_scene_options(c_r, r_scene);

    std::string p_a, p_b;
    auto* c_p = app.add_subcommand("psnr", "PSNR between two images");
    c_p->add_option("a", p_a)->required();
    c_p->add_option("b", p_b)->required();

    auto* c_v = app.add_subcommand("verify-rmcm", "exhaustive multiplier sweep");

    int s_w = 800, s_h = 800, s_n = 192, s_fine = 128;
    auto* c_s = app.add_subcommand("stats", "off-chip traffic table");
    c_s->add_option("width", s_w)->check(CLI::PositiveNumber);
    c_s->add_option("height", s_h)->check(CLI::PositiveNumber);
    c_s->add_option("samples", s_n, "samples per ray")->check(CLI::PositiveNumber);
    c_s->add_option("--fine", s_fine, "fine-pass samples per ray")->check(CLI::PositiveNumber);

    std::string o_out;
    int o_count = 8;
    double o_radius = 4.0, o_height = 1.0, o_fov = 0.6911112070083618;
    auto* c_o = app.add_subcommand("orbit-poses", "write a transforms file with cameras on a circle around the origin");
    c_o->add_option("--out", o_out)->required();
    c_o->add_option("--count", o_count)->check(CLI::PositiveNumber);
    c_o->add_option("--radius", o_radius);
    c_o->add_option("--height", o_height);
    c_o->add_option("--fov", o_fov);

    for (CLI::App* sub : {c_rm, c_q, c_r, c_p, c_v, c_s, c_o}) sub->add_flag("--json", as_json, "machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kBadArgs;
    }

    try {
        if (*c_rm) return cmd_random_model(rm);
        if (*c_q) return cmd_quantize(q_in, q_out, q_scene, q_calibrate || !q_scene.poses.empty(), as_json);
        if (*c_r) return cmd_render(r_model, r_coarse, r_out, r_mode, r_scene, as_json);
        if (*c_p) return cmd_psnr(p_a, p_b, as_json);
        if (*c_v) return cmd_verify_rmcm(as_json);
        if (*c_s) return cmd_stats(s_w, s_h, s_n, s_fine, as_json);
        if (*c_o) return cmd_orbit_poses(o_out, o_count, o_radius, o_height, o_fov);
    } catch (const ModelError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code() == ModelErrorCode::kIo ? kIoError : kBadModel;
    } catch (const ImageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIoError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kBadArgs;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kBadArgs;
    }
    return kBadArgs;
}
