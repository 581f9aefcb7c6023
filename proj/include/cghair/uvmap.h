#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cghair/card.h"
#include "cghair/types.h"

namespace cghair {

struct StrandUVSet {
    std::uint32_t strand = 0;  // index into the hairstyle
    std::uint32_t card = 0;    // index into the card list
    std::vector<Vec2> uv;
    std::vector<double> delta;
    std::vector<std::uint32_t> triangle;
    std::vector<Vec3> bary;
    std::vector<double> residual;  // |p_hat - p| per point after fitting

    std::size_t size() const { return uv.size(); }
};

struct StrandTexture {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> pixels;  // row-major coverage in [0, 1]
    std::size_t strand_count = 0;
    std::size_t sample_count = 0;
    double accumulated_mass = 0.0;  // before clamping

    float at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

struct UVLocation {
    std::uint32_t triangle = 0;
    Vec3 bary = Vec3::Zero();
};

// Triangle containing `uv` (clamped to [0,1]^2) on a strip of `guide_len` rows.
UVLocation locate_uv(std::size_t guide_len, const Vec2& uv);

Vec3 reconstruct_point(const HairCard& card, std::uint32_t triangle, const Vec3& bary, double delta);
std::vector<Vec3> reconstruct_points(const StrandUVSet& uv_set, const HairCard& card);

// Squared distance |p_hat(uv, delta) - target|^2 and its gradient with
// respect to (u, v, delta), inside the triangle containing uv.
struct PointLoss {
    double loss = 0.0;
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    Eigen::Matrix3d jacobian = Eigen::Matrix3d::Zero();  // columns d p_hat / d(u, v, delta)
};
PointLoss point_loss(const HairCard& card, const Vec2& uv, double delta, const Vec3& target);

double strand_loss(const HairCard& card, const StrandUVSet& uv_set, std::span<const Vec3> points);

StrandUVSet initialize_uv(const HairCard& card, std::span<const Vec3> points);

// Jointly fits (uv, delta) of every point by backtracking gradient descent
// with a per-point diagonal preconditioner.
StrandUVSet optimize_strand_uv(const HairCard& card, std::span<const Vec3> points, std::size_t iters, double step);

std::vector<StrandUVSet> optimize_uv(const Hairstyle& h, const StrandCluster& cluster, const HairCard& card,
                                     std::size_t iters, double step);

// Per-sample footprint amplitude: 4 samples per pixel of curve length give a
// unit-peak line.
inline constexpr double kSamplesPerPixel = 4.0;
double texture_sample_weight();

StrandTexture rasterize_strand_texture(std::span<const StrandUVSet> uv_sets, std::size_t width, std::size_t height);

std::vector<std::uint8_t> write_pgm(const StrandTexture& t);
StrandTexture parse_pgm(std::span<const std::uint8_t> bytes);

// 'CGHU': u32 set count, per set u32 strand, u32 card, u32 points, then per
// point f64 u, v, delta, u32 triangle, f64 bary xyz, f64 residual.
std::vector<std::uint8_t> write_uv_sets(std::span<const StrandUVSet> sets);
std::vector<StrandUVSet> parse_uv_sets(std::span<const std::uint8_t> bytes);

}  // namespace cghair
