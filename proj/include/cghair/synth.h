#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cghair/types.h"

namespace cghair {

struct WispParams {
    std::size_t n_wisps = 20;
    std::size_t strands_per_wisp = 100;
    std::size_t points_per_strand = 100;
    double scalp_radius = 0.1;
    double wisp_spread = 0.01;
    double curl_amplitude = 0.004;
    double curl_frequency = 25.0;  // cycles per scene unit of strand length
    std::uint64_t seed = 1;
};

// Per-Gaussian RGB targets, strand-major: colors[s * gaussians_per_strand + g].
struct AppearanceTargets {
    std::size_t strand_count = 0;
    std::size_t gaussians_per_strand = 0;
    std::vector<Vec3> colors;

    const Vec3& at(std::size_t s, std::size_t g) const { return colors[s * gaussians_per_strand + g]; }
    Vec3& at(std::size_t s, std::size_t g) { return colors[s * gaussians_per_strand + g]; }
};

Hairstyle generate_wisp_hairstyle(const WispParams& p);

// Splits each strand's Gaussians into `segments` contiguous runs (the first
// segments-1 runs take ceil(G/segments), the last takes what remains) and
// paints each run with a palette color drawn from the seeded stream.
AppearanceTargets assign_synthetic_colors(const Hairstyle& h, std::span<const Vec3> palette,
                                          std::size_t segments, std::uint64_t seed);

// Sidecar: u32 strand count, u32 gaussians per strand, float32 RGB triples.
std::vector<std::uint8_t> write_targets(const AppearanceTargets& t);
AppearanceTargets parse_targets(std::span<const std::uint8_t> bytes);

}  // namespace cghair
