#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cghair/image.h"
#include "cghair/types.h"

namespace cghair {

inline constexpr double kDefaultGaussianRadius = 1e-4;  // d, the cross-section scale
inline constexpr double kCovarianceDilation = 0.3;      // px^2 added to the projected diagonal
inline constexpr double kMaxAlpha = 0.999;
inline constexpr double kMinTransmittance = 1e-4;

struct Gaussian {
    Vec3 center = Vec3::Zero();
    Vec3 scale = Vec3::Ones();       // standard deviations along local x, y, z
    Mat3 rotation = Mat3::Identity();  // local -> world
    double opacity = 1.0;
    Eigen::VectorXd sh;              // 3 * (deg+1)^2 coefficients, basis-major
};

struct GaussianStrand {
    std::vector<Gaussian> gaussians;
};

// One cylindrical Gaussian per segment: center at the midpoint, scale
// (d, d, s/2), local z along the segment.
GaussianStrand strand_to_gaussians(const Strand& s, double d, std::span<const double> opacities,
                                   const Eigen::MatrixXd& sh);

// Rotation with local z mapped to `dir` (unit) and det +1.
Mat3 align_z(const Vec3& dir);

// Per-channel max(0, sum_b coeff * Y_b(dir) + 0.5).
Vec3 eval_sh(std::span<const double> coeffs, const Vec3& dir);
inline Vec3 eval_sh(const Eigen::VectorXd& coeffs, const Vec3& dir) {
    return eval_sh(std::span<const double>(coeffs.data(), static_cast<std::size_t>(coeffs.size())), dir);
}

struct Camera {
    Vec3 position = Vec3(0.0, 0.0, 1.0);
    Vec3 look_at = Vec3::Zero();
    Vec3 up = Vec3::UnitY();
    double fov_y = 0.8;  // radians
    std::size_t width = 256;
    std::size_t height = 256;
    double near = 0.01;

    void validate() const;
    // Rows are camera right, down, forward.
    Mat3 world_to_camera() const;
    double focal() const;
};

struct Splat2D {
    std::size_t index = 0;  // source Gaussian
    double depth = 0.0;
    Vec2 mean = Vec2::Zero();      // pixel coordinates; pixel (x, y) has its center at (x + 0.5, y + 0.5)
    Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d conic = Eigen::Matrix2d::Identity();
    double radius = 0.0;           // 3 sigma, pixels
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
};

struct RenderOptions {
    bool opaque = false;  // every Gaussian at opacity 1
    int threads = 1;
};

// Projects, culls and depth-sorts (front to back, ties by index).
std::vector<Splat2D> project_gaussians(std::span<const Gaussian> gaussians, const Camera& cam,
                                       const RenderOptions& opts = {});

// Composites one pixel over the sorted splats. When `trace` is given it
// receives the transmittance after every contributing splat.
Vec3 composite_pixel(std::span<const Splat2D> splats, std::size_t x, std::size_t y, const Vec3& background,
                     std::vector<double>* trace = nullptr);

Image render(std::span<const Gaussian> gaussians, const Camera& cam, const Vec3& background,
             const RenderOptions& opts = {});

}  // namespace cghair
