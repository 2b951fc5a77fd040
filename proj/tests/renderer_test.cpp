#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "desk_scene.hpp"
#include "icarus/camera.hpp"
#include "icarus/image.hpp"
#include "icarus/render.hpp"
#include "icarus/sampling.hpp"

using namespace icarus;

TEST(Camera, CentralRayFollowsViewAxis) {
    Camera cam;
    cam.width = cam.height = 2;
    // Pixel centres sit half a pixel from the axis in both directions.
    const Ray r = pixel_ray(cam, 1, 0);
    const double f = cam.focal();
    const Vec3 expect = normalize(Vec3{0.5 / f, 0.5 / f, -1.0});
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(r.direction[k], expect[k], 1e-12);
    EXPECT_NEAR(length(r.direction), 1.0, 1e-12);
}

TEST(Camera, FocalFromFov) {
    Camera cam;
    cam.width = 800;
    cam.fov_x = 0.6911112070083618;
    EXPECT_NEAR(cam.focal(), 1111.1110311937682, 1e-6);
}

TEST(Camera, LookAtPointsAtTarget) {
    Camera cam = icarus::testing::desk_camera(65);
    const Ray r = pixel_ray(cam, 32, 32);
    const Vec3 to_target = normalize(Vec3{0, 0, 0} - cam.origin());
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(r.direction[k], to_target[k], 1e-12);
    EXPECT_NO_THROW(cam.validate());
}

TEST(Camera, ValidateRejects) {
    Camera cam;
    cam.camera_to_world[0] = 2.0;
    EXPECT_THROW(cam.validate(), std::invalid_argument);
    cam = Camera{};
    cam.near = 6.0;
    EXPECT_THROW(cam.validate(), std::invalid_argument);
    cam = Camera{};
    cam.width = 0;
    EXPECT_THROW(cam.validate(), std::invalid_argument);
    cam = Camera{};
    cam.camera_to_world[15] = 0.5;
    EXPECT_THROW(cam.validate(), std::invalid_argument);
}

TEST(Camera, RaysAreRowMajor) {
    Camera cam;
    cam.width = 3;
    cam.height = 2;
    const auto rays = generate_rays(cam);
    ASSERT_EQ(rays.size(), 6u);
    EXPECT_EQ(rays[4].px, 1);
    EXPECT_EQ(rays[4].py, 1);
}

TEST(Sampling, StratifiedOnePerStratum) {
    Rng rng(30);
    const auto t = stratified_samples(2.0, 6.0, 64, &rng);
    ASSERT_EQ(t.size(), 64u);
    for (int i = 0; i < 64; ++i) {
        EXPECT_GE(t[i], 2.0 + i * 4.0 / 64);
        EXPECT_LT(t[i], 2.0 + (i + 1) * 4.0 / 64);
    }
    const auto mid = stratified_samples(0.0, 1.0, 4, nullptr);
    EXPECT_DOUBLE_EQ(mid[0], 0.125);
    EXPECT_DOUBLE_EQ(mid[3], 0.875);
}

TEST(Sampling, ImportanceFollowsWeights) {
    const std::vector<double> edges = {0.0, 1.0, 2.0};
    const std::vector<double> w = {1.0, 3.0};
    const auto t = importance_samples(edges, w, 1000, nullptr);
    const auto in_first = std::count_if(t.begin(), t.end(), [](double v) { return v < 1.0; });
    EXPECT_EQ(in_first, 250);
    EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
}

TEST(Sampling, ImportanceMatchesCdf) {
    // Kolmogorov-Smirnov distance against the piecewise-constant CDF.
    Rng rng(31);
    const auto edges = stratum_edges(2.0, 6.0, 16);
    std::vector<double> w(16);
    for (double& v : w) v = rng.uniform();
    const int n = 4000;
    const auto t = importance_samples(edges, w, n, &rng);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    auto cdf = [&](double x) {
        double c = 0;
        for (size_t i = 0; i < w.size(); ++i) {
            if (x >= edges[i + 1]) c += w[i];
            else if (x > edges[i]) c += w[i] * (x - edges[i]) / (edges[i + 1] - edges[i]);
        }
        return c / total;
    };
    double d = 0;
    for (int i = 0; i < n; ++i) {
        const double f = cdf(t[i]);
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    EXPECT_LT(d, 1.63 / std::sqrt(n));  // 1% critical value
}

TEST(Sampling, ZeroWeightsFallBackToUniform) {
    const auto edges = stratum_edges(0.0, 1.0, 4);
    const std::vector<double> w(4, 0.0);
    const auto t = importance_samples(edges, w, 4, nullptr);
    EXPECT_DOUBLE_EQ(t[0], 0.125);
    EXPECT_DOUBLE_EQ(t[3], 0.875);
    const std::vector<double> neg = {1, -1, 0, 0};
    EXPECT_THROW(importance_samples(edges, neg, 4, nullptr), std::invalid_argument);
    EXPECT_THROW(importance_samples(edges, std::vector<double>(3, 1.0), 4, nullptr), std::invalid_argument);
}

TEST(Sampling, MergeAndDeltas) {
    const std::vector<double> a = {1, 3, 5}, b = {2, 4};
    const auto m = merge_samples(a, b);
    EXPECT_EQ(m, (std::vector<double>{1, 2, 3, 4, 5}));
    const auto d = sample_deltas(m, 6.0);
    EXPECT_EQ(d, (std::vector<double>{1, 1, 1, 1, 1}));
}

TEST(Image, ByteQuantization) {
    EXPECT_EQ(to_byte(0.5), 128);
    EXPECT_EQ(to_byte(-1.0), 0);
    EXPECT_EQ(to_byte(2.0), 255);
    EXPECT_EQ(to_byte(1.0 / 255), 1);
}

TEST(Image, PpmBytes) {
    Image img(2, 1);
    img.at(0, 0, 0) = 1.0;
    img.at(1, 0, 2) = 0.5;
    const std::string ppm = encode_ppm(img);
    EXPECT_EQ(ppm, std::string("P6\n2 1\n255\n\xff\x00\x00\x00\x00\x80", 17));
    const Image back = decode_ppm(ppm);
    EXPECT_EQ(back.width, 2);
    EXPECT_DOUBLE_EQ(back.at(1, 0, 2), 128.0 / 255);
    EXPECT_THROW(decode_ppm("P3\n1 1\n255\n0 0 0"), ImageError);
}

TEST(Image, PngRoundTrip) {
    Image img(3, 2);
    for (size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<double>(i) / 17.0;
    const auto path = std::filesystem::temp_directory_path() / "icarus_png_round_trip.png";
    write_image(img, path);
    const Image back = read_image(path);
    std::filesystem::remove(path);
    EXPECT_EQ(to_bytes(back), to_bytes(img));
}

TEST(Image, Psnr) {
    Image a(4, 4), b(4, 4);
    EXPECT_DOUBLE_EQ(psnr(a, b), kPsnrCap);
    for (double& v : b.rgb) v = 0.01;
    EXPECT_NEAR(psnr(a, b), 40.0, 1e-9);
    Image c(2, 2);
    c.at(0, 0, 0) = c.at(0, 0, 1) = c.at(0, 0, 2) = 1.0;
    c.at(1, 1, 0) = c.at(1, 1, 1) = c.at(1, 1, 2) = 1.0;
    EXPECT_NEAR(psnr(Image(2, 2), c), 10.0 * std::log10(2.0), 1e-12);
    EXPECT_THROW(psnr(Image(2, 2), Image(2, 3)), std::invalid_argument);
}

TEST(Render, DeltaFormatHoldsSpan) {
    Camera cam;
    EXPECT_EQ(delta_format(cam, RenderSettings{}).frac_bits, 12);
    cam.far = 100.0;
    EXPECT_EQ(delta_format(cam, RenderSettings{}).frac_bits, 8);
    RenderSettings s;
    s.delta_frac = 10;
    EXPECT_EQ(delta_format(cam, s).frac_bits, 10);
}

TEST(Render, SettingsValidate) {
    RenderSettings s;
    s.coarse_samples = 0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = RenderSettings{};
    s.workers = 0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Render, WorkerCountDoesNotChangeOutput) {
    const Camera cam = icarus::testing::desk_camera(16);
    RenderSettings s = icarus::testing::desk_settings(8);
    s.fine_samples = 8;
    s.rays_per_unit = 32;
    const QuantizedModel qm = icarus::testing::desk_quantized(icarus::testing::desk_model(), cam, s);
    const RenderResult a = render_fixed(qm, cam, MultiplierMode::kApprox, s);
    s.workers = 3;
    const RenderResult b = render_fixed(qm, cam, MultiplierMode::kApprox, s);
    EXPECT_EQ(encode_ppm(a.image), encode_ppm(b.image));
    EXPECT_TRUE(a.counters == b.counters);
    EXPECT_EQ(a.counters.pixels, 256u);
    EXPECT_EQ(a.counters.dram_bytes_out, 256u * kPixelBytes);
    EXPECT_EQ(a.counters.dram_bytes_in, 256u * (8 + 16) * kInputBytesPerSample);  // coarse pass, then the union
    EXPECT_EQ(a.counters.sampler_feedback_bytes, 256u * 8 * 2);
}

TEST(Render, FixedTracksFloat) {
    const Camera cam = icarus::testing::desk_camera(16);
    const RenderSettings s = icarus::testing::desk_settings(16);
    const FloatModel fm = icarus::testing::desk_model();
    const QuantizedModel qm = icarus::testing::desk_quantized(fm, cam, s);
    const Image ref = render_float(fm, cam, s);
    EXPECT_GE(psnr(ref, render_fixed(qm, cam, MultiplierMode::kExact, s).image), 40.0);
    EXPECT_GE(psnr(ref, render_fixed(qm, cam, MultiplierMode::kApprox, s).image), 35.0);
}

TEST(Render, SeedChangesJitteredSamples) {
    const Camera cam = icarus::testing::desk_camera(8);
    RenderSettings s = icarus::testing::desk_settings(8);
    const FloatModel fm = icarus::testing::desk_model();
    const Image a = render_float(fm, cam, s);
    s.seed += 1;
    const Image b = render_float(fm, cam, s);
    EXPECT_NE(a.rgb, b.rgb);
    s.jitter = false;
    const Image c = render_float(fm, cam, s);
    s.seed += 1;
    EXPECT_EQ(c.rgb, render_float(fm, cam, s).rgb);
}
