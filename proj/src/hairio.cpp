#include "cghair/hairio.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "cghair/binary_io.h"
#include "cghair/error.h"

namespace cghair {

Hairstyle parse_hair_file(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "HAIR", 4) != 0)
        throw Error(ErrorCode::BadMagic, "not a HAIR file");
    if (bytes.size() < hairfmt::kHeaderSize)
        throw Error(ErrorCode::TruncatedFile, "header shorter than 128 bytes");

    ByteReader in(bytes);
    in.expect_magic("HAIR");
    const std::uint32_t n_strands = in.u32();
    const std::uint32_t n_points = in.u32();
    const std::uint32_t flags = in.u32();
    const std::uint32_t default_segments = in.u32();
    in.skip(hairfmt::kHeaderSize - 20);  // default thickness/transparency/color + info

    std::vector<std::uint32_t> segments(n_strands, default_segments);
    if (flags & hairfmt::kHasSegments) {
        for (auto& s : segments) s = in.u16();
    }
    std::uint64_t expected = 0;
    for (auto s : segments) expected += std::uint64_t{s} + 1;
    if (expected != n_points)
        throw Error(ErrorCode::InconsistentCounts,
                    "header declares " + std::to_string(n_points) + " points, segments imply " +
                        std::to_string(expected));
    if (!(flags & hairfmt::kHasPoints))
        throw Error(ErrorCode::InconsistentCounts, "file carries no point array");

    Hairstyle h;
    h.strands.resize(n_strands);
    for (std::uint32_t i = 0; i < n_strands; ++i) {
        auto& pts = h.strands[i].points;
        pts.resize(segments[i] + 1);
        for (auto& p : pts) {
            const float x = in.f32(), y = in.f32(), z = in.f32();
            p = Vec3(x, y, z);
        }
    }
    // Remaining arrays are validated for length but not kept.
    if (flags & hairfmt::kHasThickness) in.skip(std::size_t{n_points} * 4);
    if (flags & hairfmt::kHasTransparency) in.skip(std::size_t{n_points} * 4);
    if (flags & hairfmt::kHasColor) in.skip(std::size_t{n_points} * 12);

    if (!h.strands.empty()) {
        const auto n0 = h.strands.front().points.size();
        const bool uniform = std::all_of(h.strands.begin(), h.strands.end(),
                                         [n0](const Strand& s) { return s.points.size() == n0; });
        h.points_per_strand = uniform ? n0 : 0;
    }
    return h;
}

std::vector<std::uint8_t> write_hair_file(const Hairstyle& h) {
    if (h.strands.empty()) throw Error(ErrorCode::EmptyHairstyle, "no strands to write");
    std::uint64_t total = 0;
    for (const auto& s : h.strands) {
        if (s.points.size() < 2 || s.points.size() > 65536)
            throw Error(ErrorCode::InvalidArgument, "strand point count out of range for HAIR format");
        total += s.points.size();
    }
    if (total > std::numeric_limits<std::uint32_t>::max())
        throw Error(ErrorCode::InvalidArgument, "too many points for HAIR format");

    ByteWriter out;
    out.magic("HAIR");
    out.u32(static_cast<std::uint32_t>(h.strands.size()));
    out.u32(static_cast<std::uint32_t>(total));
    out.u32(hairfmt::kHasSegments | hairfmt::kHasPoints);
    out.u32(0);      // default segments
    out.f32(1.0f);   // default thickness
    out.f32(0.0f);   // default transparency
    out.f32(1.0f);
    out.f32(1.0f);
    out.f32(1.0f);
    char info[88] = {};
    std::strncpy(info, "cghair", sizeof(info) - 1);
    out.raw(info, sizeof(info));
    for (const auto& s : h.strands) out.u16(static_cast<std::uint16_t>(s.points.size() - 1));
    for (const auto& s : h.strands)
        for (const auto& p : s.points) {
            out.f32(static_cast<float>(p.x()));
            out.f32(static_cast<float>(p.y()));
            out.f32(static_cast<float>(p.z()));
        }
    return out.take();
}

Hairstyle parse_cgh_blob(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic("CGH0");
    const std::uint32_t n_strands = in.u32();
    const std::uint32_t n_points = in.u32();
    if (std::uint64_t{n_strands} * n_points * 12 != in.remaining())
        throw Error(in.remaining() < std::uint64_t{n_strands} * n_points * 12 ? ErrorCode::TruncatedFile
                                                                           : ErrorCode::InconsistentCounts,
                    "body size does not match declared counts");
    Hairstyle h;
    h.points_per_strand = n_points;
    h.strands.resize(n_strands);
    for (auto& s : h.strands) {
        s.points.resize(n_points);
        for (auto& p : s.points) {
            const float x = in.f32(), y = in.f32(), z = in.f32();
            p = Vec3(x, y, z);
        }
    }
    return h;
}

std::vector<std::uint8_t> write_cgh_blob(const Hairstyle& h) {
    if (h.strands.empty()) throw Error(ErrorCode::EmptyHairstyle, "no strands to write");
    const std::size_t n = h.strands.front().points.size();
    for (const auto& s : h.strands)
        if (s.points.size() != n)
            throw Error(ErrorCode::WrongPointCount, "CGH0 blobs need a uniform point count");
    ByteWriter out;
    out.magic("CGH0");
    out.u32(static_cast<std::uint32_t>(h.strands.size()));
    out.u32(static_cast<std::uint32_t>(n));
    for (const auto& s : h.strands)
        for (const auto& p : s.points) {
            out.f32(static_cast<float>(p.x()));
            out.f32(static_cast<float>(p.y()));
            out.f32(static_cast<float>(p.z()));
        }
    return out.take();
}

Hairstyle load_hairstyle(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "CGH0", 4) == 0) return parse_cgh_blob(bytes);
    return parse_hair_file(bytes);
}

double arc_length(const Polyline& pts) {
    double len = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
    return len;
}

Strand merge_coincident(const Strand& s) {
    Strand out;
    out.points.reserve(s.points.size());
    for (const auto& p : s.points)
        if (out.points.empty() || p != out.points.back()) out.points.push_back(p);
    return out;
}

Strand resample_strand(const Strand& s, std::size_t n) {
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "resample needs n >= 2");
    const auto& pts = s.points;
    if (pts.size() < 2) throw Error(ErrorCode::DegenerateStrand, "strand has fewer than 2 points");
    for (const auto& p : pts)
        if (!p.allFinite()) throw Error(ErrorCode::DegenerateStrand, "non-finite coordinate");

    std::vector<double> cum(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
    const double total = cum.back();
    if (!(total > 0.0)) throw Error(ErrorCode::DegenerateStrand, "zero total arc length");

    Strand out;
    out.points.resize(n);
    out.points.front() = pts.front();
    out.points.back() = pts.back();
    std::size_t seg = 0;
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double target = total * static_cast<double>(j) / static_cast<double>(n - 1);
        while (seg + 2 < pts.size() && cum[seg + 1] < target) ++seg;
        const double span = cum[seg + 1] - cum[seg];
        const double t = span > 0.0 ? std::clamp((target - cum[seg]) / span, 0.0, 1.0) : 0.0;
        out.points[j] = pts[seg] + t * (pts[seg + 1] - pts[seg]);
    }
    return out;
}

Hairstyle normalize_hairstyle(const Hairstyle& h, std::size_t n) {
    Hairstyle out;
    out.points_per_strand = n;
    out.strands.reserve(h.strands.size());
    for (const auto& s : h.strands) {
        Strand merged = merge_coincident(s);
        // Scalp-only roots (single point) are common in public datasets; drop them.
        if (merged.points.size() < 2) continue;
        out.strands.push_back(resample_strand(merged, n));
    }
    if (out.strands.empty()) throw Error(ErrorCode::EmptyHairstyle, "no strand survived normalization");
    return out;
}

}  // namespace cghair
