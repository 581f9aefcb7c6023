#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cghair/types.h"

namespace cghair {

struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> rgb;  // row-major, 3 values per pixel, linear [0, 1] nominal

    Image() = default;
    Image(std::size_t w, std::size_t h, const Vec3& fill = Vec3::Zero());

    Vec3 pixel(std::size_t x, std::size_t y) const;
    void set(std::size_t x, std::size_t y, const Vec3& c);
};

// Binary P6, 8 bits per channel, values clamped to [0, 1] and rounded.
std::vector<std::uint8_t> write_ppm(const Image& img);
Image parse_ppm(std::span<const std::uint8_t> bytes);

}  // namespace cghair
