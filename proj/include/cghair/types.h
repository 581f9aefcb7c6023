#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace cghair {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Polyline = std::vector<Vec3>;

struct Strand {
    Polyline points;
};

struct Hairstyle {
    std::vector<Strand> strands;
    std::size_t points_per_strand = 0;  // 0 until normalized

    std::size_t size() const { return strands.size(); }
};

}  // namespace cghair
