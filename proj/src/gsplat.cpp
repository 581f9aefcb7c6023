#include "cghair/gsplat.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "cghair/error.h"
#include "cghair/parallel.h"
#include "cghair/sh.h"

namespace cghair {

Mat3 align_z(const Vec3& dir) {
    const Vec3 z = dir.normalized();
    const Vec3 a = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 x = (a - a.dot(z) * z).normalized();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return r;
}

GaussianStrand strand_to_gaussians(const Strand& s, double d, std::span<const double> opacities,
                                   const Eigen::MatrixXd& sh) {
    if (s.points.size() < 2) throw Error(ErrorCode::TooFewPoints, "strand needs at least 2 points");
    const std::size_t g = s.points.size() - 1;
    if (opacities.size() != g || static_cast<std::size_t>(sh.rows()) != g)
        throw Error(ErrorCode::LengthMismatch, "need one opacity and one SH row per segment");
    if (!(d > 0.0)) throw Error(ErrorCode::InvalidArgument, "d must be positive");
    GaussianStrand out;
    out.gaussians.resize(g);
    for (std::size_t i = 0; i < g; ++i) {
        const Vec3 seg = s.points[i + 1] - s.points[i];
        const double len = seg.norm();
        if (!(len > 0.0)) throw Error(ErrorCode::ZeroLengthSegment, "segment " + std::to_string(i) + " has zero length");
        auto& gs = out.gaussians[i];
        gs.center = 0.5 * (s.points[i] + s.points[i + 1]);
        gs.scale = Vec3(d, d, 0.5 * len);
        gs.rotation = align_z(seg / len);
        gs.opacity = opacities[i];
        gs.sh = sh.row(static_cast<Eigen::Index>(i)).transpose();
    }
    return out;
}

Vec3 eval_sh(std::span<const double> c, const Vec3& dir) {
    if (std::abs(dir.norm() - 1.0) > 1e-6) throw Error(ErrorCode::BadDirection, "direction is not unit length");
    std::size_t degree = 0;
    while (degree <= kMaxShDegree && sh_coeff_count(degree) != c.size()) ++degree;
    if (degree > kMaxShDegree) throw Error(ErrorCode::DimensionMismatch, "coefficient count matches no SH degree");

    const double x = dir.x(), y = dir.y(), z = dir.z();
    double basis[16];
    basis[0] = kShC0;
    if (degree >= 1) {
        basis[1] = -kShC1 * y;
        basis[2] = kShC1 * z;
        basis[3] = -kShC1 * x;
    }
    if (degree >= 2) {
        const double xx = x * x, yy = y * y, zz = z * z;
        basis[4] = kShC2[0] * x * y;
        basis[5] = kShC2[1] * y * z;
        basis[6] = kShC2[2] * (2.0 * zz - xx - yy);
        basis[7] = kShC2[3] * x * z;
        basis[8] = kShC2[4] * (xx - yy);
        if (degree >= 3) {
            basis[9] = kShC3[0] * y * (3.0 * xx - yy);
            basis[10] = kShC3[1] * x * y * z;
            basis[11] = kShC3[2] * y * (4.0 * zz - xx - yy);
            basis[12] = kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
            basis[13] = kShC3[4] * x * (4.0 * zz - xx - yy);
            basis[14] = kShC3[5] * z * (xx - yy);
            basis[15] = kShC3[6] * x * (xx - 3.0 * yy);
        }
    }
    Vec3 rgb = Vec3::Constant(kShColorOffset);
    for (std::size_t b = 0; b < sh_basis_count(degree); ++b)
        for (int ch = 0; ch < 3; ++ch) rgb[ch] += basis[b] * c[3 * b + static_cast<std::size_t>(ch)];
    return rgb.cwiseMax(0.0);
}

void Camera::validate() const {
    if (!(fov_y > 0.0 && fov_y < M_PI)) throw Error(ErrorCode::InvalidArgument, "fov must lie in (0, pi)");
    if (!(near > 0.0)) throw Error(ErrorCode::InvalidArgument, "near plane must be positive");
    if (width == 0 || height == 0) throw Error(ErrorCode::ZeroResolution, "image size must be positive");
    if ((look_at - position).norm() == 0.0) throw Error(ErrorCode::InvalidArgument, "camera looks at itself");
}

Mat3 Camera::world_to_camera() const {
    const Vec3 f = (look_at - position).normalized();
    Vec3 r = f.cross(up);
    if (r.norm() < 1e-12) r = f.cross(std::abs(f.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitZ());
    r.normalize();
    const Vec3 d = f.cross(r);
    Mat3 m;
    m.row(0) = r;
    m.row(1) = d;
    m.row(2) = f;
    return m;
}

double Camera::focal() const { return 0.5 * static_cast<double>(height) / std::tan(0.5 * fov_y); }

std::vector<Splat2D> project_gaussians(std::span<const Gaussian> gaussians, const Camera& cam,
                                       const RenderOptions& opts) {
    cam.validate();
    const Mat3 w = cam.world_to_camera();
    const double f = cam.focal();
    const double cx = 0.5 * static_cast<double>(cam.width), cy = 0.5 * static_cast<double>(cam.height);

    std::vector<Splat2D> all(gaussians.size());
    std::vector<char> keep(gaussians.size(), 0);
    parallel_for(gaussians.size(), opts.threads, [&](std::size_t i) {
        const Gaussian& g = gaussians[i];
        const Vec3 pc = w * (g.center - cam.position);
        if (pc.z() <= cam.near) return;

        const Mat3 rs = g.rotation * g.scale.asDiagonal();
        const Mat3 cov_cam = w * (rs * rs.transpose()) * w.transpose();
        Eigen::Matrix<double, 2, 3> j;
        const double iz = 1.0 / pc.z();
        j << f * iz, 0.0, -f * pc.x() * iz * iz, 0.0, f * iz, -f * pc.y() * iz * iz;
        Eigen::Matrix2d cov = j * cov_cam * j.transpose();
        cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
        cov.diagonal().array() += kCovarianceDilation;

        const double det = cov.determinant();
        if (!(det > 0.0)) return;
        const double mid = 0.5 * cov.trace();
        const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));

        Splat2D s;
        s.index = i;
        s.depth = pc.z();
        s.mean = Vec2(f * pc.x() * iz + cx, f * pc.y() * iz + cy);
        s.cov = cov;
        s.conic = cov.inverse();
        s.radius = 3.0 * std::sqrt(lambda_max);
        if (s.mean.x() + s.radius < 0.0 || s.mean.y() + s.radius < 0.0 ||
            s.mean.x() - s.radius > static_cast<double>(cam.width) ||
            s.mean.y() - s.radius > static_cast<double>(cam.height))
            return;
        s.opacity = opts.opaque ? 1.0 : std::clamp(g.opacity, 0.0, 1.0);
        s.color = eval_sh(g.sh, (g.center - cam.position).normalized());
        all[i] = s;
        keep[i] = 1;
    });

    std::vector<Splat2D> out;
    out.reserve(gaussians.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        if (keep[i]) out.push_back(all[i]);
    std::sort(out.begin(), out.end(), [](const Splat2D& a, const Splat2D& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
    });
    return out;
}

namespace {

double splat_alpha(const Splat2D& s, double px, double py) {
    const Vec2 d(px - s.mean.x(), py - s.mean.y());
    const double power = -0.5 * d.dot(s.conic * d);
    return std::clamp(s.opacity * std::exp(power), 0.0, kMaxAlpha);
}

}  // namespace

Vec3 composite_pixel(std::span<const Splat2D> splats, std::size_t x, std::size_t y, const Vec3& background,
                     std::vector<double>* trace) {
    const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
    Vec3 c = Vec3::Zero();
    double t = 1.0;
    for (const auto& s : splats) {
        if (std::abs(px - s.mean.x()) > s.radius || std::abs(py - s.mean.y()) > s.radius) continue;
        const double a = splat_alpha(s, px, py);
        c += t * a * s.color;
        t *= 1.0 - a;
        if (trace) trace->push_back(t);
        if (t < kMinTransmittance) break;
    }
    return c + t * background;
}

Image render(std::span<const Gaussian> gaussians, const Camera& cam, const Vec3& background,
             const RenderOptions& opts) {
    const auto splats = project_gaussians(gaussians, cam, opts);
    const std::size_t w = cam.width, h = cam.height;
    Image img(w, h);

    // Rows are independent; each band walks the same sorted list, so the
    // result does not depend on how rows are split across workers.
    constexpr std::size_t kBand = 16;
    const std::size_t bands = (h + kBand - 1) / kBand;
    parallel_for(bands, opts.threads, [&](std::size_t b) {
        const std::size_t y0 = b * kBand, y1 = std::min(h, y0 + kBand);
        std::vector<Vec3> color((y1 - y0) * w, Vec3::Zero());
        std::vector<double> trans((y1 - y0) * w, 1.0);
        for (const auto& s : splats) {
            const double ylo = s.mean.y() - s.radius, yhi = s.mean.y() + s.radius;
            if (yhi < static_cast<double>(y0) || ylo > static_cast<double>(y1)) continue;
            const auto ya = static_cast<std::size_t>(std::max(static_cast<double>(y0), std::ceil(ylo - 0.5)));
            const auto yb = static_cast<std::size_t>(std::clamp(std::floor(yhi - 0.5), -1.0, static_cast<double>(y1 - 1)) + 1.0);
            const auto xa = static_cast<std::size_t>(std::max(0.0, std::ceil(s.mean.x() - s.radius - 0.5)));
            const auto xb = static_cast<std::size_t>(
                std::clamp(std::floor(s.mean.x() + s.radius - 0.5), -1.0, static_cast<double>(w - 1)) + 1.0);
            for (std::size_t y = ya; y < yb; ++y)
                for (std::size_t x = xa; x < xb; ++x) {
                    const std::size_t i = (y - y0) * w + x;
                    double& t = trans[i];
                    if (t < kMinTransmittance) continue;
                    const double a = splat_alpha(s, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
                    color[i] += t * a * s.color;
                    t *= 1.0 - a;
                }
        }
        for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = (y - y0) * w + x;
                img.set(x, y, color[i] + trans[i] * background);
            }
    });
    return img;
}

}  // namespace cghair
