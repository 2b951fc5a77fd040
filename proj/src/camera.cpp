#include "icarus/camera.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace icarus {

double Camera::focal() const { return 0.5 * width / std::tan(0.5 * fov_x); }

void Camera::validate() const {
    for (double v : camera_to_world)
        if (!std::isfinite(v)) throw std::invalid_argument("camera: pose has non-finite entries");
    constexpr double kTol = 1e-4;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double d = 0.0;
            for (int k = 0; k < 3; ++k) d += m(k, i) * m(k, j);
            if (std::abs(d - (i == j ? 1.0 : 0.0)) > kTol)
                throw std::invalid_argument("camera: rotation block is not orthonormal");
        }
    if (std::abs(m(3, 0)) > kTol || std::abs(m(3, 1)) > kTol || std::abs(m(3, 2)) > kTol || std::abs(m(3, 3) - 1) > kTol)
        throw std::invalid_argument("camera: last pose row must be (0, 0, 0, 1)");
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera: image dimensions must be positive");
    if (!(fov_x > 0.0 && fov_x < std::numbers::pi)) throw std::invalid_argument("camera: fov_x must be in (0, pi)");
    if (!(near >= 0.0 && near < far && std::isfinite(far))) throw std::invalid_argument("camera: need 0 <= near < far");
}

Ray pixel_ray(const Camera& cam, int px, int py) {
    const double f = cam.focal();
    const Vec3 d_cam{(px + 0.5 - 0.5 * cam.width) / f, -(py + 0.5 - 0.5 * cam.height) / f, -1.0};
    Vec3 d{};
    for (int r = 0; r < 3; ++r) d[r] = cam.m(r, 0) * d_cam[0] + cam.m(r, 1) * d_cam[1] + cam.m(r, 2) * d_cam[2];
    return Ray{cam.origin(), normalize(d), px, py};
}

std::vector<Ray> generate_rays(const Camera& cam) {
    cam.validate();
    std::vector<Ray> rays;
    rays.reserve(static_cast<size_t>(cam.width) * cam.height);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) rays.push_back(pixel_ray(cam, x, y));
    return rays;
}

std::array<double, 16> look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 back = normalize(eye - target);  // camera +z
    const Vec3 right = normalize(cross(up, back));
    const Vec3 cam_up = cross(back, right);
    return {right[0], cam_up[0], back[0], eye[0],
            right[1], cam_up[1], back[1], eye[1],
            right[2], cam_up[2], back[2], eye[2],
            0, 0, 0, 1};
}

}  // namespace icarus
