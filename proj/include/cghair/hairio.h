#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cghair/types.h"

namespace cghair {

inline constexpr std::size_t kCanonicalPointCount = 100;

// Community binary hair format: 'HAIR' magic, 128-byte header, optional
// segment/point/thickness/transparency/color arrays. Only points survive
// parsing; the other arrays are validated and skipped.
namespace hairfmt {
inline constexpr std::uint32_t kHasSegments = 1u << 0;
inline constexpr std::uint32_t kHasPoints = 1u << 1;
inline constexpr std::uint32_t kHasThickness = 1u << 2;
inline constexpr std::uint32_t kHasTransparency = 1u << 3;
inline constexpr std::uint32_t kHasColor = 1u << 4;
inline constexpr std::size_t kHeaderSize = 128;
}  // namespace hairfmt

Hairstyle parse_hair_file(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_hair_file(const Hairstyle& h);

// Internal interchange blob: 'CGH0', u32 strand count, u32 points per strand,
// then float32 xyz triples in strand order. All strands must share a count.
Hairstyle parse_cgh_blob(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_cgh_blob(const Hairstyle& h);

// Dispatches on magic ('HAIR' or 'CGH0').
Hairstyle load_hairstyle(const std::filesystem::path& path);

double arc_length(const Polyline& pts);
Strand merge_coincident(const Strand& s);
Strand resample_strand(const Strand& s, std::size_t n);

// merge_coincident + resample_strand on every strand.
Hairstyle normalize_hairstyle(const Hairstyle& h, std::size_t n = kCanonicalPointCount);

}  // namespace cghair
