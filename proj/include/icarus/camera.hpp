#pragma once

// Pinhole cameras in the common NeRF convention: camera space looks down
// -z with +y up, and the pose matrix maps camera space to world space.

#include <array>
#include <vector>

#include "icarus/vec.hpp"

namespace icarus {

struct Camera {
    std::array<double, 16> camera_to_world{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};  // row-major 4x4
    double fov_x = 0.6911112070083618;
    int width = 64;
    int height = 64;
    double near = 2.0;
    double far = 6.0;

    double m(int row, int col) const { return camera_to_world[static_cast<size_t>(row) * 4 + col]; }
    Vec3 origin() const { return {m(0, 3), m(1, 3), m(2, 3)}; }
    double focal() const;

    /// Throws std::invalid_argument for non-finite entries, a rotation block
    /// that is not orthonormal within 1e-4, a bad last row, non-positive
    /// dimensions, fov outside (0, pi) or near >= far.
    void validate() const;
};

struct Ray {
    Vec3 origin{};
    Vec3 direction{};  // unit length
    int px = 0;
    int py = 0;
};

/// Ray through the centre of pixel (px, py); (0, 0) is the top-left pixel.
Ray pixel_ray(const Camera& cam, int px, int py);

/// One ray per pixel, row-major.
std::vector<Ray> generate_rays(const Camera& cam);

/// Pose at `eye` looking at `target`.
std::array<double, 16> look_at(const Vec3& eye, const Vec3& target, const Vec3& up = {0, 0, 1});

}  // namespace icarus
