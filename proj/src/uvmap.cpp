#include "cghair/uvmap.h"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <sstream>

#include <Eigen/LU>

#include "cghair/binary_io.h"
#include "cghair/bspline.h"
#include "cghair/error.h"

namespace cghair {
namespace {

constexpr int kMaxHalvings = 40;
constexpr std::size_t kTextureSplineCtrl = 24;
constexpr int kFootprintRadius = 4;

struct TriangleFrame {
    std::array<std::uint32_t, 3> vid;
    Eigen::Matrix<double, 3, 2> dbary;  // d lambda_m / d(u, v)
};

TriangleFrame triangle_frame(const HairCard& card, std::uint32_t tri) {
    if (tri >= card.mesh.triangles.size())
        throw Error(ErrorCode::InvalidTriangleIndex, "triangle " + std::to_string(tri) + " out of range");
    TriangleFrame f;
    f.vid = card.mesh.triangles[tri];
    const Vec2& u0 = card.mesh.uvs[f.vid[0]];
    Eigen::Matrix2d m;
    m.col(0) = card.mesh.uvs[f.vid[1]] - u0;
    m.col(1) = card.mesh.uvs[f.vid[2]] - u0;
    const Eigen::Matrix2d inv = m.inverse();
    f.dbary.row(1) = inv.row(0);
    f.dbary.row(2) = inv.row(1);
    f.dbary.row(0) = -(inv.row(0) + inv.row(1));
    return f;
}

}  // namespace

UVLocation locate_uv(std::size_t guide_len, const Vec2& uv_in) {
    if (guide_len < 2) throw Error(ErrorCode::InvalidArgument, "card needs at least 2 rows");
    const double u = std::clamp(uv_in.x(), 0.0, 1.0);
    const double v = std::clamp(uv_in.y(), 0.0, 1.0);
    const auto rows = static_cast<double>(guide_len - 1);
    const auto k = std::min(static_cast<std::size_t>(std::floor(v * rows)), guide_len - 2);
    const double s = std::clamp(v * rows - static_cast<double>(k), 0.0, 1.0);
    UVLocation loc;
    if (s <= u) {
        loc.triangle = static_cast<std::uint32_t>(2 * k);
        loc.bary = Vec3(1.0 - u, u - s, s);
    } else {
        loc.triangle = static_cast<std::uint32_t>(2 * k + 1);
        loc.bary = Vec3(1.0 - s, u, s - u);
    }
    return loc;
}

Vec3 reconstruct_point(const HairCard& card, std::uint32_t triangle, const Vec3& bary, double delta) {
    if (triangle >= card.mesh.triangles.size())
        throw Error(ErrorCode::InvalidTriangleIndex, "triangle " + std::to_string(triangle) + " out of range");
    const auto& t = card.mesh.triangles[triangle];
    Vec3 v = Vec3::Zero();
    Vec3 n = Vec3::Zero();
    for (int m = 0; m < 3; ++m) {
        v += bary[m] * card.mesh.vertices[t[m]];
        n += bary[m] * card.mesh.vertex_normals[t[m]];
    }
    return v + delta * n.normalized();
}

std::vector<Vec3> reconstruct_points(const StrandUVSet& uv_set, const HairCard& card) {
    std::vector<Vec3> out(uv_set.size());
    for (std::size_t i = 0; i < uv_set.size(); ++i)
        out[i] = reconstruct_point(card, uv_set.triangle[i], uv_set.bary[i], uv_set.delta[i]);
    return out;
}

PointLoss point_loss(const HairCard& card, const Vec2& uv, double delta, const Vec3& target) {
    const UVLocation loc = locate_uv(card.guide.size(), uv);
    const TriangleFrame f = triangle_frame(card, loc.triangle);

    Vec3 v = Vec3::Zero(), m = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
        v += loc.bary[i] * card.mesh.vertices[f.vid[i]];
        m += loc.bary[i] * card.mesh.vertex_normals[f.vid[i]];
    }
    const double mlen = m.norm();
    const Vec3 nhat = m / mlen;
    const Vec3 r = v + delta * nhat - target;

    PointLoss out;
    out.loss = r.squaredNorm();
    const Mat3 proj = (Mat3::Identity() - nhat * nhat.transpose()) / mlen;
    for (int a = 0; a < 2; ++a) {
        Vec3 dv = Vec3::Zero(), dm = Vec3::Zero();
        for (int i = 0; i < 3; ++i) {
            dv += f.dbary(i, a) * card.mesh.vertices[f.vid[i]];
            dm += f.dbary(i, a) * card.mesh.vertex_normals[f.vid[i]];
        }
        out.jacobian.col(a) = dv + delta * (proj * dm);
    }
    out.jacobian.col(2) = nhat;
    out.grad = 2.0 * out.jacobian.transpose() * r;
    return out;
}

double strand_loss(const HairCard& card, const StrandUVSet& uv_set, std::span<const Vec3> points) {
    double l = 0.0;
    for (std::size_t i = 0; i < uv_set.size(); ++i)
        l += (reconstruct_point(card, uv_set.triangle[i], uv_set.bary[i], uv_set.delta[i]) - points[i]).squaredNorm();
    return l;
}

StrandUVSet initialize_uv(const HairCard& card, std::span<const Vec3> points) {
    StrandUVSet s;
    s.card = card.cluster_id;
    const auto rows = static_cast<double>(card.guide.size() - 1);
    for (const auto& p : points) {
        const std::size_t k = associate_point(card.guide, p);
        const Vec3 r = p - card.guide[k];
        const double u = std::clamp(0.5 + r.dot(card.bitangents[k]) / (2.0 * card.width), 0.0, 1.0);
        const Vec2 uv(u, static_cast<double>(k) / rows);
        const UVLocation loc = locate_uv(card.guide.size(), uv);
        s.uv.push_back(uv);
        s.delta.push_back(r.dot(card.normals[k]));
        s.triangle.push_back(loc.triangle);
        s.bary.push_back(loc.bary);
    }
    s.residual.assign(points.size(), 0.0);
    for (std::size_t i = 0; i < points.size(); ++i)
        s.residual[i] = (reconstruct_point(card, s.triangle[i], s.bary[i], s.delta[i]) - points[i]).norm();
    return s;
}

StrandUVSet optimize_strand_uv(const HairCard& card, std::span<const Vec3> points, std::size_t iters, double step) {
    if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be positive");
    StrandUVSet s = initialize_uv(card, points);
    // Points are independent, so each one runs its own line search; the
    // strand loss is their sum and inherits the per-point monotonicity.
    for (std::size_t i = 0; i < points.size(); ++i) {
        Vec2 uv = s.uv[i];
        double delta = s.delta[i];
        for (std::size_t it = 0; it < iters; ++it) {
            const PointLoss pl = point_loss(card, uv, delta, points[i]);
            if (pl.loss == 0.0) break;
            Eigen::Vector3d dir;
            for (int a = 0; a < 3; ++a) {
                const double c = pl.jacobian.col(a).squaredNorm();
                dir[a] = c > 0.0 ? pl.grad[a] / (2.0 * c) : 0.0;
            }
            double alpha = step;
            bool improved = false;
            for (int h = 0; h < kMaxHalvings; ++h) {
                const Vec2 tuv(std::clamp(uv.x() - alpha * dir[0], 0.0, 1.0),
                               std::clamp(uv.y() - alpha * dir[1], 0.0, 1.0));
                const double td = delta - alpha * dir[2];
                const double tl = point_loss(card, tuv, td, points[i]).loss;
                if (tl <= pl.loss) {
                    improved = tl < pl.loss;
                    uv = tuv;
                    delta = td;
                    break;
                }
                alpha *= 0.5;
            }
            if (!improved) break;
        }
        const UVLocation loc = locate_uv(card.guide.size(), uv);
        s.uv[i] = uv;
        s.delta[i] = delta;
        s.triangle[i] = loc.triangle;
        s.bary[i] = loc.bary;
        s.residual[i] = (reconstruct_point(card, loc.triangle, loc.bary, delta) - points[i]).norm();
    }
    return s;
}

std::vector<StrandUVSet> optimize_uv(const Hairstyle& h, const StrandCluster& cluster, const HairCard& card,
                                     std::size_t iters, double step) {
    std::vector<StrandUVSet> out;
    out.reserve(cluster.members.size());
    for (auto m : cluster.members) {
        out.push_back(optimize_strand_uv(card, h.strands.at(m).points, iters, step));
        out.back().strand = m;
    }
    return out;
}

double texture_sample_weight() { return 1.0 / (kSamplesPerPixel * std::sqrt(2.0 * M_PI)); }

StrandTexture rasterize_strand_texture(std::span<const StrandUVSet> uv_sets, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw Error(ErrorCode::ZeroResolution, "texture resolution must be positive");
    StrandTexture tex;
    tex.width = width;
    tex.height = height;
    std::vector<double> acc(width * height, 0.0);
    const double amp = texture_sample_weight();
    const auto w = static_cast<double>(width), hgt = static_cast<double>(height);

    auto splat = [&](const Vec2& px) {
        const auto cx = static_cast<int>(std::lround(px.x()));
        const auto cy = static_cast<int>(std::lround(px.y()));
        for (int y = cy - kFootprintRadius; y <= cy + kFootprintRadius; ++y) {
            if (y < 0 || y >= static_cast<int>(height)) continue;
            for (int x = cx - kFootprintRadius; x <= cx + kFootprintRadius; ++x) {
                if (x < 0 || x >= static_cast<int>(width)) continue;
                const double dx = x - px.x(), dy = y - px.y();
                const double c = amp * std::exp(-0.5 * (dx * dx + dy * dy));
                acc[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] += c;
                tex.accumulated_mass += c;
            }
        }
        ++tex.sample_count;
    };

    for (const auto& set : uv_sets) {
        if (set.uv.empty()) continue;
        ++tex.strand_count;
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(set.uv.size()), 2);
        double len = 0.0;
        for (std::size_t i = 0; i < set.uv.size(); ++i) {
            pts(static_cast<Eigen::Index>(i), 0) = set.uv[i].x() * w;
            pts(static_cast<Eigen::Index>(i), 1) = set.uv[i].y() * hgt;
            if (i > 0) len += (pts.row(static_cast<Eigen::Index>(i)) - pts.row(static_cast<Eigen::Index>(i - 1))).norm();
        }
        const auto n = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(kSamplesPerPixel * len)) + 1);
        if (set.uv.size() >= 4) {
            const auto spline = fit_cubic_bspline(pts, kTextureSplineCtrl);
            const Eigen::MatrixXd s = spline.sample(n);
            for (Eigen::Index i = 0; i < s.rows(); ++i) splat(Vec2(s(i, 0), s(i, 1)));
        } else {
            // Too few points for a cubic; walk the polyline by arc length.
            for (std::size_t j = 0; j < n; ++j) {
                const double target = len * static_cast<double>(j) / static_cast<double>(n - 1);
                double run = 0.0;
                Vec2 p = pts.row(0).transpose();
                for (Eigen::Index i = 1; i < pts.rows(); ++i) {
                    const Vec2 a = pts.row(i - 1).transpose(), b = pts.row(i).transpose();
                    const double seg = (b - a).norm();
                    if (run + seg >= target || i + 1 == pts.rows()) {
                        const double t = seg > 0.0 ? std::clamp((target - run) / seg, 0.0, 1.0) : 0.0;
                        p = a + t * (b - a);
                        break;
                    }
                    run += seg;
                }
                splat(p);
            }
        }
    }
    tex.pixels.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) tex.pixels[i] = static_cast<float>(std::min(acc[i], 1.0));
    return tex;
}

std::vector<std::uint8_t> write_pgm(const StrandTexture& t) {
    const std::string header = "P5\n" + std::to_string(t.width) + " " + std::to_string(t.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + t.pixels.size());
    for (float p : t.pixels)
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)));
    return out;
}

StrandTexture parse_pgm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        std::string tok;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
        return tok;
    };
    if (token() != "P5") throw Error(ErrorCode::BadMagic, "not a binary PGM");
    StrandTexture t;
    t.width = std::stoul(token());
    t.height = std::stoul(token());
    if (std::stoul(token()) != 255) throw Error(ErrorCode::InvalidArgument, "only 8-bit PGM is supported");
    ++pos;  // single whitespace before the raster
    if (bytes.size() < pos + t.width * t.height) throw Error(ErrorCode::TruncatedFile, "PGM raster is short");
    t.pixels.resize(t.width * t.height);
    for (std::size_t i = 0; i < t.pixels.size(); ++i) t.pixels[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
    return t;
}

std::vector<std::uint8_t> write_uv_sets(std::span<const StrandUVSet> sets) {
    ByteWriter out;
    out.magic("CGHU");
    out.u32(static_cast<std::uint32_t>(sets.size()));
    for (const auto& s : sets) {
        out.u32(s.strand);
        out.u32(s.card);
        out.u32(static_cast<std::uint32_t>(s.size()));
        for (std::size_t i = 0; i < s.size(); ++i) {
            out.f64(s.uv[i].x());
            out.f64(s.uv[i].y());
            out.f64(s.delta[i]);
            out.u32(s.triangle[i]);
            out.f64(s.bary[i].x());
            out.f64(s.bary[i].y());
            out.f64(s.bary[i].z());
            out.f64(s.residual[i]);
        }
    }
    return out.take();
}

std::vector<StrandUVSet> parse_uv_sets(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic("CGHU");
    std::vector<StrandUVSet> sets(in.u32());
    for (auto& s : sets) {
        s.strand = in.u32();
        s.card = in.u32();
        const std::uint32_t n = in.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            const double u = in.f64(), v = in.f64();
            s.uv.emplace_back(u, v);
            s.delta.push_back(in.f64());
            s.triangle.push_back(in.u32());
            const double a = in.f64(), b = in.f64(), c = in.f64();
            s.bary.emplace_back(a, b, c);
            s.residual.push_back(in.f64());
        }
    }
    if (in.remaining() != 0) throw Error(ErrorCode::InconsistentCounts, "trailing bytes in uv file");
    return sets;
}

}  // namespace cghair
