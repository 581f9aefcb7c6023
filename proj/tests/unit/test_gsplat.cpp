#include "doctest.h"
#include "helpers.h"

#include "cghair/error.h"
#include "cghair/gsplat.h"
#include "cghair/image.h"
#include "cghair/sh.h"

using namespace cghair;

namespace {

Eigen::VectorXd dc_color(const Vec3& rgb, std::size_t degree = 0) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sh_coeff_count(degree)));
    for (int ch = 0; ch < 3; ++ch) c[ch] = sh_dc_for_color(rgb[ch]);
    return c;
}

Gaussian blob(const Vec3& center, double sigma, const Vec3& rgb) {
    Gaussian g;
    g.center = center;
    g.scale = Vec3::Constant(sigma);
    g.opacity = 1.0;
    g.sh = dc_color(rgb);
    return g;
}

Camera front_camera() {
    Camera c;
    c.position = Vec3(0, 0, 2);
    c.look_at = Vec3::Zero();
    c.width = 33;
    c.height = 33;
    c.fov_y = 0.8;
    return c;
}

// Composite by hand, front to back, for the center pixel of two splats.
Vec3 manual_two(const Vec3& front, double a_front, const Vec3& back, double a_back, const Vec3& bg) {
    Vec3 c = a_front * front;
    double t = 1 - a_front;
    c += t * a_back * back;
    t *= 1 - a_back;
    return c + t * bg;
}

}  // namespace

TEST_SUITE("gsplat") {

TEST_CASE("axis aligned segment") {
    const Strand s{{Vec3(0, 0, 0), Vec3(0, 0, 1)}};
    const std::vector<double> op = {0.5};
    const auto gs = strand_to_gaussians(s, 1e-4, op, Eigen::MatrixXd::Zero(1, 3));
    REQUIRE(gs.gaussians.size() == 1);
    const auto& g = gs.gaussians[0];
    CHECK(g.center == Vec3(0, 0, 0.5));
    CHECK(g.scale == Vec3(1e-4, 1e-4, 0.5));
    CHECK(testutil::max_abs_diff(g.rotation, Mat3::Identity()) < 1e-12);
    CHECK(g.opacity == 0.5);
}

TEST_CASE("hundred points give 99 Gaussians with aligned rotations") {
    Rng rng(3);
    const Strand s = testutil::random_strand(rng, 100);
    const std::vector<double> op(99, 1.0);
    const auto gs = strand_to_gaussians(s, 1e-4, op, Eigen::MatrixXd::Zero(99, 12));
    REQUIRE(gs.gaussians.size() == 99);
    for (std::size_t i = 0; i < 99; ++i) {
        const auto& g = gs.gaussians[i];
        const Vec3 dir = (s.points[i + 1] - s.points[i]).normalized();
        CHECK((g.rotation * Vec3::UnitZ() - dir).norm() < 1e-9);
        CHECK(testutil::max_abs_diff(g.rotation.transpose() * g.rotation, Mat3::Identity()) < 1e-6);
        CHECK(g.rotation.determinant() == doctest::Approx(1.0));
        CHECK((g.center - 0.5 * (s.points[i] + s.points[i + 1])).norm() == 0.0);
        CHECK(g.scale.z() == doctest::Approx(0.5 * (s.points[i + 1] - s.points[i]).norm()));
    }
    for (int i = 0; i < 200; ++i) {
        const Vec3 d = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
        const Mat3 r = align_z(d);
        CHECK((r * Vec3::UnitZ() - d).norm() < 1e-9);
        CHECK(r.determinant() == doctest::Approx(1.0));
    }
}

TEST_CASE("construction errors") {
    const Strand dup{{Vec3(0, 0, 0), Vec3(0, 0, 0)}};
    const std::vector<double> op = {1.0};
    try {
        strand_to_gaussians(dup, 1e-4, op, Eigen::MatrixXd::Zero(1, 3));
        FAIL("expected ZeroLengthSegment");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroLengthSegment);
    }
    const Strand ok{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)}};
    CHECK_THROWS_AS(strand_to_gaussians(ok, 1e-4, op, Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST_CASE("spherical harmonics") {
    Rng rng(1);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(12);
    CHECK(eval_sh(zero, Vec3::UnitX()) == Vec3::Constant(0.5));
    for (int i = 0; i < 50; ++i) {
        const Vec3 d = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
        const double c = rng.uniform(0.0, 0.4);
        Eigen::VectorXd dc(3);
        dc.setConstant(c / kShC0);
        const Vec3 col = eval_sh(dc, d);
        for (int ch = 0; ch < 3; ++ch) CHECK(col[ch] == doctest::Approx(c + 0.5).epsilon(1e-12));

        Eigen::VectorXd co(12);
        for (int k = 0; k < 12; ++k) co[k] = rng.normal(0, 0.3);
        const double x = d.x(), y = d.y(), z = d.z();
        const double basis[4] = {0.28209479177387814, -0.4886025119029199 * y, 0.4886025119029199 * z,
                                 -0.4886025119029199 * x};
        const Vec3 got = eval_sh(co, d);
        for (int ch = 0; ch < 3; ++ch) {
            double v = 0.5;
            for (int b = 0; b < 4; ++b) v += co[b * 3 + ch] * basis[b];
            CHECK(std::abs(got[ch] - std::max(v, 0.0)) < 1e-7);
        }
    }
    try {
        eval_sh(zero, Vec3(0, 0, 2));
        FAIL("expected BadDirection");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadDirection);
    }
}

TEST_CASE("empty scene is background") {
    const Vec3 bg(0.2, 0.4, 0.6);
    const Image img = render({}, front_camera(), bg);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) CHECK(img.pixel(x, y) == bg);
}

TEST_CASE("single opaque splat at the center") {
    const std::vector<Gaussian> g = {blob(Vec3::Zero(), 0.1, Vec3(1, 0, 0))};
    const Image img = render(g, front_camera(), Vec3::Zero());
    const Vec3 c = img.pixel(16, 16);
    CHECK(std::abs(c.x() - 1.0) <= 1.0 / 255);
    CHECK(std::abs(c.y()) <= 1.0 / 255);
    CHECK(std::abs(c.z()) <= 1.0 / 255);
}

TEST_CASE("occlusion follows depth") {
    const Vec3 red(1, 0, 0), green(0, 1, 0), bg(0, 0, 1);
    auto scene = [&](double z_red, double z_green) {
        return std::vector<Gaussian>{blob(Vec3(0, 0, z_red), 0.1, red), blob(Vec3(0, 0, z_green), 0.1, green)};
    };
    const Camera cam = front_camera();
    const Vec3 a = render(scene(0.5, 0.0), cam, bg).pixel(16, 16);
    const Vec3 b = render(scene(0.0, 0.5), cam, bg).pixel(16, 16);
    CHECK((a - red).norm() < 2.0 / 255);
    CHECK((b - green).norm() < 2.0 / 255);

    // Translucent splats against a hand composite of the same alphas.
    auto half = scene(0.5, 0.0);
    half[0].opacity = 0.5;
    half[1].opacity = 0.5;
    const auto splats = project_gaussians(half, cam);
    REQUIRE(splats.size() == 2);
    CHECK(splats[0].index == 0);
    auto alpha = [&](const Splat2D& s) {
        const Vec2 d = Vec2(16.5, 16.5) - s.mean;
        return std::min(kMaxAlpha, s.opacity * std::exp(-0.5 * d.dot(s.conic * d)));
    };
    const Vec3 want = manual_two(red, alpha(splats[0]), green, alpha(splats[1]), bg);
    CHECK((composite_pixel(splats, 16, 16, bg) - want).norm() < 1e-12);
}

TEST_CASE("transmittance never increases") {
    Rng rng(2);
    std::vector<Gaussian> g;
    for (int i = 0; i < 60; ++i) {
        Gaussian b = blob(Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.5, 0.5)), rng.uniform(0.02, 0.1),
                          Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
        b.opacity = rng.uniform(0.1, 1.0);
        b.scale.z() *= 3;
        b.rotation = align_z(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized());
        g.push_back(b);
    }
    const Camera cam = front_camera();
    const auto splats = project_gaussians(g, cam);
    for (std::size_t i = 1; i < splats.size(); ++i) CHECK(splats[i - 1].depth <= splats[i].depth);
    for (const auto& s : splats) {
        CHECK(s.cov(0, 1) == s.cov(1, 0));
        CHECK(s.cov.determinant() > 0.0);
        CHECK(s.cov(0, 0) > 0.0);
    }
    for (std::size_t y = 0; y < 33; y += 4)
        for (std::size_t x = 0; x < 33; x += 4) {
            std::vector<double> trace;
            composite_pixel(splats, x, y, Vec3::Zero(), &trace);
            double prev = 1.0;
            for (double t : trace) {
                CHECK(t <= prev);
                CHECK(t >= 0.0);
                prev = t;
            }
        }
    const Image a = render(g, cam, Vec3::Zero());
    RenderOptions four;
    four.threads = 4;
    const Image b = render(g, cam, Vec3::Zero(), four);
    CHECK(write_ppm(a) == write_ppm(b));
    CHECK(a.rgb == b.rgb);
}

TEST_CASE("culling and camera validation") {
    const Camera cam = front_camera();
    const std::vector<Gaussian> behind = {blob(Vec3(0, 0, 3), 0.1, Vec3(1, 1, 1)), blob(Vec3(50, 0, 0), 0.1, Vec3(1, 1, 1))};
    CHECK(project_gaussians(behind, cam).empty());
    Camera bad = cam;
    bad.fov_y = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = cam;
    bad.width = 0;
    CHECK_THROWS_AS(render({}, bad, Vec3::Zero()), Error);
    const Mat3 r = cam.world_to_camera();
    CHECK(testutil::max_abs_diff(r * r.transpose(), Mat3::Identity()) < 1e-12);
    CHECK((r.row(2).transpose() - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("ppm round trip") {
    Image img(3, 2, Vec3(0.5, 0.25, 1.0));
    img.set(1, 1, Vec3(0, 1, 0.2));
    const Image back = parse_ppm(write_ppm(img));
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) CHECK(std::abs(back.rgb[i] - img.rgb[i]) <= 0.5 / 255 + 1e-12);
}

}
