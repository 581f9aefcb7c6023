#include "cghair/card.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cghair/binary_io.h"
#include "cghair/bspline.h"
#include "cghair/error.h"

namespace cghair {
namespace {

constexpr int kMaxHalvings = 40;

Vec3 perpendicular_to(const Vec3& t) {
    const Vec3 axis = std::abs(t.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return (axis - axis.dot(t) * t).normalized();
}

struct PlaneCoords {
    std::vector<double> a, b;  // offsets along e1, e2
};

double segment_objective(const PlaneCoords& pc, double theta, double eps) {
    const double c = std::cos(theta), s = std::sin(theta);
    double f = 0.0;
    for (std::size_t i = 0; i < pc.a.size(); ++i) {
        const double x = pc.a[i] * c + pc.b[i] * s;
        f += std::sqrt(x * x + eps * eps);
    }
    return f;
}

double segment_gradient(const PlaneCoords& pc, double theta, double eps) {
    const double c = std::cos(theta), s = std::sin(theta);
    double g = 0.0;
    for (std::size_t i = 0; i < pc.a.size(); ++i) {
        const double x = pc.a[i] * c + pc.b[i] * s;
        g += x / std::sqrt(x * x + eps * eps) * (-pc.a[i] * s + pc.b[i] * c);
    }
    return g;
}

}  // namespace

Polyline fit_guide(const Strand& guide_raw, std::size_t n_ctrl, std::size_t n_out) {
    if (guide_raw.points.size() < 4) throw Error(ErrorCode::TooFewPoints, "guide needs at least 4 points");
    if (n_ctrl < 4) throw Error(ErrorCode::InvalidArgument, "n_ctrl must be >= 4");
    if (n_out < 2) throw Error(ErrorCode::InvalidArgument, "n_out must be >= 2");
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(guide_raw.points.size()), 3);
    for (std::size_t i = 0; i < guide_raw.points.size(); ++i)
        pts.row(static_cast<Eigen::Index>(i)) = guide_raw.points[i].transpose();
    const auto spline = fit_cubic_bspline(pts, n_ctrl);
    const Eigen::MatrixXd s = spline.sample(n_out);
    Polyline out(n_out);
    for (std::size_t i = 0; i < n_out; ++i) out[i] = s.row(static_cast<Eigen::Index>(i)).transpose();
    return out;
}

std::vector<Vec3> compute_tangents(const Polyline& guide) {
    const std::size_t n = guide.size();
    if (n < 2) throw Error(ErrorCode::TooFewPoints, "tangents need at least 2 points");
    std::vector<Vec3> t(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Vec3& a = guide[k == 0 ? 0 : k - 1];
        const Vec3& b = guide[k + 1 == n ? n - 1 : k + 1];
        const Vec3 d = b - a;
        if (!(d.norm() > 0.0)) throw Error(ErrorCode::ZeroLengthSegment, "guide has coincident points");
        t[k] = d.normalized();
    }
    return t;
}

std::vector<Vec3> transport_normals(std::span<const Vec3> tangents) {
    std::vector<Vec3> n(tangents.size());
    if (tangents.empty()) return n;
    n[0] = perpendicular_to(tangents[0]);
    for (std::size_t k = 1; k < tangents.size(); ++k) {
        Vec3 v = n[k - 1] - n[k - 1].dot(tangents[k]) * tangents[k];
        // A near-reversal of the tangent loses the carried vector; restart.
        n[k] = v.norm() > 1e-8 ? v.normalized() : perpendicular_to(tangents[k]);
    }
    return n;
}

std::size_t associate_point(const Polyline& guide, const Vec3& p) {
    std::vector<double> s(guide.size(), 0.0);
    for (std::size_t k = 1; k < guide.size(); ++k) s[k] = s[k - 1] + (guide[k] - guide[k - 1]).norm();

    double best_d = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    for (std::size_t k = 0; k + 1 < guide.size(); ++k) {
        const Vec3 d = guide[k + 1] - guide[k];
        const double len2 = d.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((p - guide[k]).dot(d) / len2, 0.0, 1.0) : 0.0;
        const double dist = (guide[k] + t * d - p).squaredNorm();
        if (dist < best_d) {
            best_d = dist;
            best_s = s[k] + t * (s[k + 1] - s[k]);
        }
    }
    std::size_t arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < guide.size(); ++k) {
        const double d = std::abs(s[k] - best_s);
        if (d < best) {
            best = d;
            arg = k;
        }
    }
    return arg;
}

PointSets gather_point_sets(const Polyline& guide, const Hairstyle& h, std::span<const std::uint32_t> members) {
    PointSets sets(guide.size());
    for (auto m : members)
        for (const auto& p : h.strands.at(m).points) sets[associate_point(guide, p)].push_back(p);
    return sets;
}

double plane_distance_objective(const Polyline& guide, std::span<const Vec3> normals, const PointSets& sets,
                                double eps) {
    double f = 0.0;
    for (std::size_t k = 0; k < sets.size(); ++k)
        for (const auto& p : sets[k]) {
            const double x = (p - guide[k]).dot(normals[k]);
            f += std::sqrt(x * x + eps * eps);
        }
    return f;
}

std::vector<Vec3> optimize_normals(const Polyline& guide, std::span<const Vec3> tangents, const PointSets& sets,
                                   std::size_t iters, double step, double eps) {
    if (tangents.size() != guide.size() || sets.size() != guide.size())
        throw Error(ErrorCode::LengthMismatch, "guide, tangents and point sets must align");
    if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be positive");
    for (const auto& t : tangents)
        if (std::abs(t.norm() - 1.0) > 1e-6) throw Error(ErrorCode::NonUnitTangent, "tangent is not unit length");

    const auto init = transport_normals(tangents);
    std::vector<Vec3> out(init);
    for (std::size_t k = 0; k < guide.size(); ++k) {
        if (sets[k].empty()) continue;
        const Vec3 e1 = init[k];
        const Vec3 e2 = tangents[k].cross(e1);
        PlaneCoords pc;
        double scale = 0.0;
        for (const auto& p : sets[k]) {
            const Vec3 r = p - guide[k];
            pc.a.push_back(r.dot(e1));
            pc.b.push_back(r.dot(e2));
            scale += std::hypot(pc.a.back(), pc.b.back());
        }
        if (!(scale > 0.0)) continue;

        // The absolute-distance objective is piecewise concave in theta with
        // kinks where the plane passes through a point, so its minimum sits on
        // a kink; start from the best kink (or theta = 0) and polish.
        double theta = 0.0;
        double f = segment_objective(pc, theta, eps);
        for (std::size_t i = 0; i < pc.a.size(); ++i) {
            const double cand = std::atan2(-pc.a[i], pc.b[i]);
            const double fc = segment_objective(pc, cand, eps);
            if (fc < f) {
                f = fc;
                theta = cand;
            }
        }

        double lr = step;
        for (std::size_t it = 0; it < iters; ++it) {
            const double g = segment_gradient(pc, theta, eps) / scale;
            if (g == 0.0) break;
            bool accepted = false;
            for (int h = 0; h < kMaxHalvings; ++h) {
                const double trial = theta - lr * g;
                const double ft = segment_objective(pc, trial, eps);
                if (ft <= f) {
                    theta = trial;
                    accepted = ft < f;
                    f = ft;
                    break;
                }
                lr *= 0.5;
            }
            if (!accepted) break;
        }
        out[k] = std::cos(theta) * e1 + std::sin(theta) * e2;
    }
    return out;
}

std::vector<Vec3> smooth_and_orient_normals(std::span<const Vec3> normals, std::span<const Vec3> tangents,
                                            double sigma) {
    if (normals.size() != tangents.size()) throw Error(ErrorCode::LengthMismatch, "normals/tangents differ in length");
    if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
    const std::size_t n = normals.size();
    std::vector<Vec3> flipped(normals.begin(), normals.end());
    for (std::size_t k = 1; k < n; ++k)
        if (flipped[k].dot(flipped[k - 1]) < 0.0) flipped[k] = -flipped[k];

    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<Vec3> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Vec3 acc = Vec3::Zero();
        double wsum = 0.0;
        for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(k) + d;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
            const double w = std::exp(-0.5 * static_cast<double>(d * d) / (sigma * sigma));
            acc += w * flipped[static_cast<std::size_t>(j)];
            wsum += w;
        }
        acc /= wsum;
        acc -= acc.dot(tangents[k]) * tangents[k];
        const double len = acc.norm();
        if (len < 1e-8) throw Error(ErrorCode::DegenerateAfterSmoothing, "normal vanished after smoothing");
        out[k] = acc / len;
    }
    return out;
}

CardMesh build_card_mesh(const Polyline& guide, std::span<const Vec3> normals, std::span<const Vec3> bitangents,
                         double width) {
    const std::size_t n = guide.size();
    CardMesh m;
    m.vertices.reserve(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        const double v = n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.0;
        m.vertices.push_back(guide[k] - width * bitangents[k]);
        m.vertices.push_back(guide[k] + width * bitangents[k]);
        m.uvs.emplace_back(0.0, v);
        m.uvs.emplace_back(1.0, v);
        m.vertex_normals.push_back(normals[k]);
        m.vertex_normals.push_back(normals[k]);
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const auto a = static_cast<std::uint32_t>(2 * k);
        m.triangles.push_back({a, a + 1, a + 3});
        m.triangles.push_back({a, a + 3, a + 2});
    }
    return m;
}

HairCard build_card(const Hairstyle& h, const StrandCluster& cluster, const CardConfig& cfg) {
    if (cluster.members.empty()) throw Error(ErrorCode::EmptyInput, "cluster has no strands");
    HairCard card;
    card.cluster_id = cluster.id;
    card.guide = fit_guide(cluster.guide, cfg.guide_ctrl, cfg.card_points);
    card.tangents = compute_tangents(card.guide);

    const PointSets sets = gather_point_sets(card.guide, h, cluster.members);
    const auto raw = optimize_normals(card.guide, card.tangents, sets, cfg.normal_iters, cfg.normal_step, cfg.eps);
    card.normals = smooth_and_orient_normals(raw, card.tangents, cfg.smooth_sigma);

    card.bitangents.resize(card.guide.size());
    for (std::size_t k = 0; k < card.guide.size(); ++k)
        card.bitangents[k] = card.normals[k].cross(card.tangents[k]).normalized();

    double w = 0.0;
    for (std::size_t k = 0; k < sets.size(); ++k)
        for (const auto& p : sets[k]) w = std::max(w, std::abs((p - card.guide[k]).dot(card.bitangents[k])));
    card.width = std::max(w, cfg.w_min);
    card.mesh = build_card_mesh(card.guide, card.normals, card.bitangents, card.width);
    return card;
}

std::vector<std::uint8_t> write_cards(std::span<const HairCard> cards) {
    ByteWriter out;
    out.magic("CGHK");
    out.u32(static_cast<std::uint32_t>(cards.size()));
    auto vec = [&out](const Vec3& v) {
        out.f64(v.x());
        out.f64(v.y());
        out.f64(v.z());
    };
    for (const auto& c : cards) {
        out.u32(c.cluster_id);
        out.u32(static_cast<std::uint32_t>(c.guide.size()));
        out.f64(c.width);
        for (std::size_t k = 0; k < c.guide.size(); ++k) {
            vec(c.guide[k]);
            vec(c.tangents[k]);
            vec(c.normals[k]);
            vec(c.bitangents[k]);
        }
    }
    return out.take();
}

std::vector<HairCard> parse_cards(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic("CGHK");
    const std::uint32_t n = in.u32();
    auto vec = [&in] {
        const double x = in.f64(), y = in.f64(), z = in.f64();
        return Vec3(x, y, z);
    };
    std::vector<HairCard> cards(n);
    for (auto& c : cards) {
        c.cluster_id = in.u32();
        const std::uint32_t len = in.u32();
        c.width = in.f64();
        for (std::uint32_t k = 0; k < len; ++k) {
            c.guide.push_back(vec());
            c.tangents.push_back(vec());
            c.normals.push_back(vec());
            c.bitangents.push_back(vec());
        }
        c.mesh = build_card_mesh(c.guide, c.normals, c.bitangents, c.width);
    }
    if (in.remaining() != 0) throw Error(ErrorCode::InconsistentCounts, "trailing bytes in card file");
    return cards;
}

std::string cards_to_obj(std::span<const HairCard> cards) {
    std::ostringstream os;
    os.precision(9);
    os << "# cghair card meshes\n";
    std::size_t base = 1;
    for (const auto& c : cards) {
        os << "o card_" << c.cluster_id << "\n";
        for (const auto& v : c.mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << "\n";
        for (const auto& uv : c.mesh.uvs) os << "vt " << uv.x() << ' ' << uv.y() << "\n";
        for (const auto& t : c.mesh.triangles) {
            os << "f";
            for (auto i : t) os << ' ' << base + i << '/' << base + i;
            os << "\n";
        }
        base += c.mesh.vertices.size();
    }
    return os.str();
}

}  // namespace cghair
