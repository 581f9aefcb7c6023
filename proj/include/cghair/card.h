#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cghair/kmeans.h"
#include "cghair/types.h"

namespace cghair {

struct CardConfig {
    std::size_t guide_ctrl = 10;   // B-spline control points for the guide fit
    std::size_t card_points = 16;  // guide samples after downsampling
    std::size_t normal_iters = 100;
    double normal_step = 0.1;      // radians per unit normalized gradient
    double smooth_sigma = 1.0;     // in guide-point indices
    double w_min = 1e-4;
    double eps = 1e-6;             // smoothing of |x| in the plane-distance objective
};

// Strip mesh: vertex 2k = guide[k] - w*b[k] (u = 0), vertex 2k+1 = guide[k] + w*b[k]
// (u = 1), both at v = k/(len-1). Row k holds triangles 2k = (2k, 2k+1, 2k+3)
// and 2k+1 = (2k, 2k+3, 2k+2), split along the (0,v_k)-(1,v_k+1) diagonal.
struct CardMesh {
    std::vector<Vec3> vertices;
    std::vector<Vec2> uvs;
    std::vector<Vec3> vertex_normals;
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

struct HairCard {
    std::uint32_t cluster_id = 0;
    Polyline guide;
    std::vector<Vec3> tangents;
    std::vector<Vec3> normals;
    std::vector<Vec3> bitangents;  // normal x tangent
    double width = 0.0;
    CardMesh mesh;
};

Polyline fit_guide(const Strand& guide_raw, std::size_t n_ctrl, std::size_t n_out);

// Normalized central differences; one-sided at the ends.
std::vector<Vec3> compute_tangents(const Polyline& guide);

// Arbitrary first normal carried along the guide by projection.
std::vector<Vec3> transport_normals(std::span<const Vec3> tangents);

// Index of the guide point whose arc-length parameter is closest to the
// point's projection onto the guide polyline.
std::size_t associate_point(const Polyline& guide, const Vec3& p);

using PointSets = std::vector<std::vector<Vec3>>;

PointSets gather_point_sets(const Polyline& guide, const Hairstyle& h, std::span<const std::uint32_t> members);

// Sum over k and p in N_k of sqrt(((p - guide[k]) . n_k)^2 + eps^2).
double plane_distance_objective(const Polyline& guide, std::span<const Vec3> normals, const PointSets& sets,
                                double eps);

// Minimizes the plane-distance objective over normals constrained to the
// plane orthogonal to each tangent, starting from transport_normals.
std::vector<Vec3> optimize_normals(const Polyline& guide, std::span<const Vec3> tangents, const PointSets& sets,
                                   std::size_t iters, double step, double eps = 1e-6);

std::vector<Vec3> smooth_and_orient_normals(std::span<const Vec3> normals, std::span<const Vec3> tangents,
                                            double sigma);

CardMesh build_card_mesh(const Polyline& guide, std::span<const Vec3> normals, std::span<const Vec3> bitangents,
                         double width);

HairCard build_card(const Hairstyle& h, const StrandCluster& cluster, const CardConfig& cfg);

// 'CGHK' card file: u32 count, then per card u32 cluster id, u32 guide length,
// f64 width, and f64 guide/tangent/normal/bitangent triples.
std::vector<std::uint8_t> write_cards(std::span<const HairCard> cards);
std::vector<HairCard> parse_cards(std::span<const std::uint8_t> bytes);

std::string cards_to_obj(std::span<const HairCard> cards);

}  // namespace cghair
