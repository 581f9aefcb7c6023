#include "cghair/synth.h"

#include <algorithm>
#include <cmath>

#include "cghair/binary_io.h"
#include "cghair/error.h"
#include "cghair/random.h"

namespace cghair {
namespace {

Vec3 any_perpendicular(const Vec3& v) {
    const Vec3 axis = std::abs(v.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitZ();
    return v.cross(axis).normalized();
}

// Unit direction on the upper hemisphere at polar angle `polar` from +y.
Vec3 hemisphere_dir(double polar, double azimuth) {
    return {std::sin(polar) * std::cos(azimuth), std::cos(polar), std::sin(polar) * std::sin(azimuth)};
}

}  // namespace

Hairstyle generate_wisp_hairstyle(const WispParams& p) {
    if (p.n_wisps < 1 || p.strands_per_wisp < 1 || p.points_per_strand < 2)
        throw Error(ErrorCode::InvalidArgument, "wisp counts must be >= 1 and points >= 2");
    if (!(p.scalp_radius > 0.0) || !(p.wisp_spread > 0.0))
        throw Error(ErrorCode::InvalidArgument, "scalp radius and wisp spread must be positive");

    Rng rng(p.seed);
    const double length = 2.5 * p.scalp_radius;
    const double quarter = 0.25 * p.wisp_spread;

    Hairstyle h;
    h.points_per_strand = p.points_per_strand;
    h.strands.reserve(p.n_wisps * p.strands_per_wisp);

    for (std::size_t w = 0; w < p.n_wisps; ++w) {
        const double polar = rng.uniform(0.0, 1.2);
        const double azimuth = rng.uniform(0.0, 2.0 * M_PI);
        const Vec3 root_dir = hemisphere_dir(polar, azimuth);

        // Cubic guide shape relative to the root: outward, sideways sweep, droop.
        Vec3 sweep = Vec3(root_dir.x(), 0.0, root_dir.z());
        sweep = sweep.norm() > 1e-6 ? sweep.normalized() : any_perpendicular(Vec3::UnitY());
        const double c1 = rng.uniform(0.15, 0.35);
        const double c2 = rng.uniform(0.2, 0.5);
        const double c3 = rng.uniform(0.5, 0.9);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const Vec3 main_dir = (c1 * root_dir + c2 * sweep - c3 * Vec3::UnitY()).normalized();
        const Vec3 e1 = any_perpendicular(main_dir);
        const Vec3 e2 = main_dir.cross(e1);

        const Vec3 t1 = any_perpendicular(root_dir);
        const Vec3 t2 = root_dir.cross(t1);

        for (std::size_t j = 0; j < p.strands_per_wisp; ++j) {
            // Root jitter of at most `quarter` along the sphere.
            const double r = quarter * std::sqrt(rng.uniform());
            const double a = rng.uniform(0.0, 2.0 * M_PI);
            Vec3 root = (root_dir + (r / p.scalp_radius) * (std::cos(a) * t1 + std::sin(a) * t2)).normalized() *
                        p.scalp_radius;
            if (root.y() < 0.0) root.y() = -root.y();

            // Tip fan of at most `quarter`, growing linearly from the root.
            const double fr = quarter * std::sqrt(rng.uniform());
            const double fa = rng.uniform(0.0, 2.0 * M_PI);
            const Vec3 fan = fr * (std::cos(fa) * e1 + std::sin(fa) * e2);

            Strand s;
            s.points.resize(p.points_per_strand);
            for (std::size_t i = 0; i < p.points_per_strand; ++i) {
                const double t = static_cast<double>(i) / static_cast<double>(p.points_per_strand - 1);
                const Vec3 shape =
                    length * (c1 * t * root_dir + c2 * t * t * sweep - c3 * t * t * t * Vec3::UnitY());
                const double arg = 2.0 * M_PI * p.curl_frequency * length * t + phase;
                const Vec3 curl = p.curl_amplitude * t *
                                  ((std::cos(arg) - std::cos(phase)) * e1 + (std::sin(arg) - std::sin(phase)) * e2);
                s.points[i] = root + shape + curl + t * fan;
            }
            h.strands.push_back(std::move(s));
        }
    }
    return h;
}

AppearanceTargets assign_synthetic_colors(const Hairstyle& h, std::span<const Vec3> palette,
                                          std::size_t segments, std::uint64_t seed) {
    if (palette.empty()) throw Error(ErrorCode::InvalidArgument, "palette is empty");
    if (segments < 1) throw Error(ErrorCode::InvalidArgument, "segments must be >= 1");
    if (h.strands.empty()) throw Error(ErrorCode::EmptyHairstyle, "no strands to color");
    const std::size_t g = h.strands.front().points.size() - 1;
    for (const auto& s : h.strands)
        if (s.points.size() != g + 1)
            throw Error(ErrorCode::WrongPointCount, "strands must share a point count");

    Rng rng(seed);
    AppearanceTargets t;
    t.strand_count = h.strands.size();
    t.gaussians_per_strand = g;
    t.colors.resize(t.strand_count * g);
    const std::size_t run = (g + segments - 1) / segments;
    for (std::size_t s = 0; s < t.strand_count; ++s) {
        std::size_t start = 0;
        for (std::size_t k = 0; k < segments; ++k) {
            const Vec3 color = palette[rng.index(palette.size())];
            const std::size_t end = (k + 1 == segments) ? g : std::min(g, start + run);
            for (std::size_t i = start; i < end; ++i) t.at(s, i) = color;
            start = end;
        }
    }
    return t;
}

std::vector<std::uint8_t> write_targets(const AppearanceTargets& t) {
    ByteWriter out;
    out.u32(static_cast<std::uint32_t>(t.strand_count));
    out.u32(static_cast<std::uint32_t>(t.gaussians_per_strand));
    for (const auto& c : t.colors) {
        out.f32(static_cast<float>(c.x()));
        out.f32(static_cast<float>(c.y()));
        out.f32(static_cast<float>(c.z()));
    }
    return out.take();
}

AppearanceTargets parse_targets(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    AppearanceTargets t;
    t.strand_count = in.u32();
    t.gaussians_per_strand = in.u32();
    const std::size_t n = t.strand_count * t.gaussians_per_strand;
    if (in.remaining() != n * 12)
        throw Error(in.remaining() < n * 12 ? ErrorCode::TruncatedFile : ErrorCode::InconsistentCounts,
                    "target sidecar size does not match its counts");
    t.colors.resize(n);
    for (auto& c : t.colors) {
        const float r = in.f32(), g = in.f32(), b = in.f32();
        c = Vec3(r, g, b);
    }
    return t;
}

}  // namespace cghair
