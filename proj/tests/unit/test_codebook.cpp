#include <set>

#include "doctest.h"
#include "helpers.h"

#include "cghair/codebook.h"
#include "cghair/error.h"
#include "cghair/model_io.h"
#include "cghair/sh.h"

using namespace cghair;

namespace {

ModelShape small_shape(std::size_t strands) {
    ModelShape s;
    s.strands = strands;
    s.gaussians = 5;
    s.clusters = 2;
    s.entries = 3;
    s.feature_dim = 8;
    s.hidden = 6;
    s.sh_degree = 1;
    return s;
}

// Strands alternate between two cards, cards map one-to-one onto clusters.
CompactAppearanceModel small_model(std::uint64_t seed, std::size_t strands = 6) {
    const ModelShape shape = small_shape(strands);
    std::vector<std::uint32_t> strand_card(strands);
    for (std::size_t s = 0; s < strands; ++s) strand_card[s] = static_cast<std::uint32_t>(s % 2);
    auto m = init_model(shape, strand_card, {0, 1}, seed);
    // Spread every parameter so no class sits at a trivial point.
    Rng rng(seed + 100);
    for (auto& cb : m.codebooks) cb.entries = Eigen::MatrixXd::NullaryExpr(3, 8, [&] { return rng.normal(); });
    m.decoder.b1 = Eigen::VectorXd::NullaryExpr(6, [&] { return rng.normal(0, 0.3); });
    m.decoder.w2 = Eigen::MatrixXd::NullaryExpr(m.decoder.w2.rows(), 6, [&] { return rng.normal(0, 0.5); });
    m.decoder.b2 = Eigen::VectorXd::NullaryExpr(m.decoder.b2.size(), [&] { return rng.normal(0, 0.3); });
    m.opacity = Eigen::MatrixXd::NullaryExpr(5, static_cast<Eigen::Index>(strands), [&] { return rng.uniform(0.1, 0.9); });
    return m;
}

AppearanceTargets random_targets(std::uint64_t seed, std::size_t strands, std::size_t g) {
    Rng rng(seed);
    AppearanceTargets t;
    t.strand_count = strands;
    t.gaussians_per_strand = g;
    for (std::size_t i = 0; i < strands * g; ++i) t.colors.push_back(Vec3(rng.uniform(), rng.uniform(), rng.uniform()));
    return t;
}

// Central differences of the total loss over every entry of `param`.
template <class Mat>
double relative_fd_error(CompactAppearanceModel& m, Mat& param, const Mat& analytic, const AppearanceTargets& t,
                         double tau, const Eigen::MatrixXd& noise, double lambda_o) {
    const double h = 1e-6;
    Mat fd = analytic;
    for (Eigen::Index i = 0; i < param.size(); ++i) {
        const double keep = param.data()[i];
        param.data()[i] = keep + h;
        const double up = distillation_loss(m, t, tau, noise, lambda_o, nullptr).total();
        param.data()[i] = keep - h;
        const double down = distillation_loss(m, t, tau, noise, lambda_o, nullptr).total();
        param.data()[i] = keep;
        fd.data()[i] = (up - down) / (2 * h);
    }
    const double scale = std::max(analytic.norm(), 1e-10);
    return (fd - analytic).norm() / scale;
}

double dc_color(const Eigen::MatrixXd& sh, Eigen::Index g, int ch) {
    return std::max(0.0, kShColorOffset + kShC0 * sh(g, ch));
}

}  // namespace

TEST_SUITE("codebook") {

TEST_CASE("texture feature") {
    StrandTexture flat;
    flat.width = flat.height = 64;
    flat.pixels.assign(64 * 64, 0.7f);
    const auto z = texture_feature(flat, 32);
    CHECK(z.size() == 1024);
    CHECK(z.norm() == 0.0);

    StrandTexture t;
    t.width = 8;
    t.height = 4;
    Rng rng(2);
    for (int i = 0; i < 32; ++i) t.pixels.push_back(static_cast<float>(rng.uniform()));
    const auto f = texture_feature(t, 2);
    // Independent box means, centered and normalized.
    Eigen::VectorXd box(4);
    for (int gy = 0; gy < 2; ++gy)
        for (int gx = 0; gx < 2; ++gx) {
            double s = 0;
            for (int y = 2 * gy; y < 2 * gy + 2; ++y)
                for (int x = 4 * gx; x < 4 * gx + 4; ++x) s += t.pixels[static_cast<std::size_t>(y * 8 + x)];
            box[gy * 2 + gx] = s / 8.0;
        }
    box.array() -= box.mean();
    box /= box.norm();
    CHECK((f - box).norm() < 1e-12);
    CHECK_THROWS_AS(texture_feature(t, 5), Error);
}

TEST_CASE("card clustering recovers two families") {
    std::vector<Eigen::VectorXd> feats;
    Rng rng(9);
    for (int i = 0; i < 20; ++i) {
        StrandTexture t;
        t.width = t.height = 32;
        t.pixels.assign(32 * 32, 0.0f);
        const std::size_t col = (i % 2 ? 8 : 24) + rng.index(3);
        for (std::size_t y = 0; y < 32; ++y) t.pixels[y * 32 + col] = 1.0f;
        feats.push_back(texture_feature(t, 4));
    }
    const auto cc = cluster_cards(feats, 2, 4);
    for (int i = 2; i < 20; ++i) CHECK(cc.assignments[static_cast<std::size_t>(i)] == cc.assignments[static_cast<std::size_t>(i % 2)]);
    CHECK(cc.assignments[0] != cc.assignments[1]);
    const auto single = cluster_cards(feats, 20, 4);
    CHECK(single.inertia == doctest::Approx(0.0));
}

TEST_CASE("gumbel softmax") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
    for (double tau : {0.01, 1.0, 7.0}) {
        const auto w = gumbel_softmax(Eigen::VectorXd::Constant(4, 2.5), tau, zero);
        for (int i = 0; i < 4; ++i) CHECK(w[i] == doctest::Approx(0.25).epsilon(1e-14));
    }
    const Eigen::VectorXd l = (Eigen::VectorXd(3) << 2, 1, 0).finished();
    CHECK(gumbel_softmax(l, 0.01, Eigen::VectorXd::Zero(3))[0] > 1 - 1e-3);
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd a(6), n(6);
        for (int i = 0; i < 6; ++i) {
            a[i] = rng.normal(0, 5);
            n[i] = rng.gumbel();
        }
        const auto w = gumbel_softmax(a, rng.uniform(0.05, 3), n);
        CHECK(std::abs(w.sum() - 1.0) < 1e-9);
        CHECK(w.minCoeff() >= 0.0);
        // Temperature limit once the top two logits are at least 0.5 apart.
        Eigen::VectorXd s = a;
        std::sort(s.data(), s.data() + s.size());
        if (s[5] - s[4] >= 0.5) {
            Eigen::Index arg = 0;
            a.maxCoeff(&arg);
            const auto hard = gumbel_softmax(a, 1e-3, Eigen::VectorXd::Zero(6));
            CHECK(hard[arg] > 1 - 1e-9);
        }
    }
    try {
        gumbel_softmax(l, 0.0, Eigen::VectorXd::Zero(3));
        FAIL("expected NonPositiveTemperature");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonPositiveTemperature);
    }
}

TEST_CASE("blend and decode against direct sums") {
    Rng rng(6);
    AppearanceCodebook cb;
    cb.entries = Eigen::MatrixXd::NullaryExpr(5, 7, [&] { return rng.normal(); });
    for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd one = Eigen::VectorXd::Zero(5);
        one[k] = 1.0;
        CHECK(blend_codebook(one, cb) == cb.entries.row(k).transpose());
    }
    Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(5, [&] { return rng.uniform(); });
    w /= w.sum();
    const auto f = blend_codebook(w, cb);
    for (int d = 0; d < 7; ++d) {
        double s = 0;
        for (int k = 0; k < 5; ++k) s += w[k] * cb.entries(k, d);
        CHECK(std::abs(f[d] - s) < 1e-7);
    }
    AppearanceCodebook same;
    same.entries = Eigen::MatrixXd::Ones(5, 1) * cb.entries.row(0);
    CHECK((blend_codebook(w, same) - cb.entries.row(0).transpose()).norm() < 1e-12);
    CHECK_THROWS_AS(blend_codebook(Eigen::VectorXd::Ones(4), cb), Error);

    DecoderMLP dec;
    dec.gaussians = 4;
    dec.sh_degree = 1;
    dec.w1 = Eigen::MatrixXd::NullaryExpr(9, 7, [&] { return rng.normal(); });
    dec.b1 = Eigen::VectorXd::NullaryExpr(9, [&] { return rng.normal(); });
    dec.w2 = Eigen::MatrixXd::NullaryExpr(48, 9, [&] { return rng.normal(); });
    dec.b2 = Eigen::VectorXd::NullaryExpr(48, [&] { return rng.normal(); });
    const auto sh = decode_strand_appearance(f, dec);
    REQUIRE(sh.rows() == 4);
    REQUIRE(sh.cols() == 12);
    std::vector<double> hid(9);
    for (int j = 0; j < 9; ++j) {
        double a = dec.b1[j];
        for (int d = 0; d < 7; ++d) a += dec.w1(j, d) * f[d];
        hid[static_cast<std::size_t>(j)] = a > 0 ? a : 0;
    }
    for (int o = 0; o < 48; ++o) {
        double a = dec.b2[o];
        for (int j = 0; j < 9; ++j) a += dec.w2(o, j) * hid[static_cast<std::size_t>(j)];
        CHECK(std::abs(sh(o / 12, o % 12) - a) < 1e-12);
    }
    DecoderMLP zero = dec;
    zero.w1.setZero();
    zero.b1.setZero();
    zero.w2.setZero();
    zero.b2.setZero();
    CHECK(decode_strand_appearance(f, zero).norm() == 0.0);
    try {
        decode_strand_appearance(Eigen::VectorXd::Ones(3), dec);
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
}

TEST_CASE("default shape decodes 99 by 12") {
    ModelShape shape;
    shape.strands = 2;
    const auto m = init_model(shape, {0, 0}, {0}, 1);
    CHECK(m.codebooks.size() == 64);
    CHECK(decode_model_strand(m, 1, 1.0).rows() == 99);
    CHECK(decode_model_strand(m, 1, 1.0).cols() == 12);
}

TEST_CASE("a strand ignores other clusters") {
    auto m = small_model(3);
    const auto before = decode_model_strand(m, 0, 0.5);
    m.codebooks[1].entries.array() += 10.0;
    CHECK(decode_model_strand(m, 0, 0.5) == before);
    CHECK(decode_model_strand(m, 1, 0.5) != decode_model_strand(small_model(3), 1, 0.5));
}

TEST_CASE("distillation gradients match central differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto m = small_model(seed);
        const auto t = random_targets(seed, 6, 5);
        Rng rng(seed + 7);
        const Eigen::MatrixXd noise = Eigen::MatrixXd::NullaryExpr(3, 6, [&] { return rng.gumbel(); });
        const double tau = 0.7, lambda_o = 0.05;
        ModelGrad g;
        distillation_loss(m, t, tau, noise, lambda_o, &g);
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(relative_fd_error(m, m.codebooks[c].entries, g.codebooks[c], t, tau, noise, lambda_o) < 1e-4);
        CHECK(relative_fd_error(m, m.logits, g.logits, t, tau, noise, lambda_o) < 1e-4);
        CHECK(relative_fd_error(m, m.decoder.w1, g.w1, t, tau, noise, lambda_o) < 1e-4);
        CHECK(relative_fd_error(m, m.decoder.b1, g.b1, t, tau, noise, lambda_o) < 1e-4);
        CHECK(relative_fd_error(m, m.decoder.w2, g.w2, t, tau, noise, lambda_o) < 1e-4);
        CHECK(relative_fd_error(m, m.decoder.b2, g.b2, t, tau, noise, lambda_o) < 1e-4);
        CHECK(relative_fd_error(m, m.opacity, g.opacity, t, tau, noise, lambda_o) < 1e-4);
    }
}

TEST_CASE("fit edge cases and trace") {
    const auto m = small_model(1, 8);
    const auto t = random_targets(1, 8, 5);
    FitHyper h;
    h.iters = 0;
    const auto same = fit_appearance(m, t, h);
    CHECK(write_model(same.model) == write_model(m));
    CHECK(same.trace.empty());

    h.iters = 40;
    h.seed = 3;
    const auto fit = fit_appearance(m, t, h);
    REQUIRE(fit.trace.size() == 40);
    for (const auto& step : fit.trace)
        if (step.accepted) CHECK(step.loss_after <= step.loss_before);
    CHECK(fit.trace.back().loss_after < fit.trace.front().loss_before);

    h.threads = 3;
    h.chunk = 3;
    const auto a = fit_appearance(m, t, h);
    h.threads = 1;
    const auto b = fit_appearance(m, t, h);
    CHECK(write_model(a.model) == write_model(b.model));

    try {
        fit_appearance(m, AppearanceTargets{}, h);
        FAIL("expected EmptyTargets");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyTargets);
    }
}

TEST_CASE("single entry learns a constant color") {
    ModelShape shape;
    shape.strands = 20;
    shape.gaussians = 10;
    shape.clusters = 1;
    shape.entries = 1;
    shape.feature_dim = 8;
    shape.hidden = 16;
    const auto m = init_model(shape, std::vector<std::uint32_t>(20, 0), {0}, 2);
    AppearanceTargets t;
    t.strand_count = 20;
    t.gaussians_per_strand = 10;
    t.colors.assign(200, Vec3(0.9, 0.1, 0.1));
    FitHyper h;
    h.iters = 200;
    const auto fit = fit_appearance(m, t, h);
    CHECK(mean_color_error(fit.model, t, fit.model.tau) < 0.01);
}

TEST_CASE("four colors fit in ten entries") {
    const std::vector<Vec3> pal = {Vec3(0.85, 0.15, 0.10), Vec3(0.15, 0.55, 0.85), Vec3(0.95, 0.80, 0.25),
                                   Vec3(0.25, 0.20, 0.15)};
    ModelShape shape;
    shape.strands = 40;
    shape.gaussians = 10;
    shape.clusters = 1;
    shape.entries = 10;
    shape.feature_dim = 16;
    shape.hidden = 32;
    AppearanceTargets t;
    t.strand_count = 40;
    t.gaussians_per_strand = 10;
    for (std::size_t s = 0; s < 40; ++s)
        for (int g = 0; g < 10; ++g) t.colors.push_back(pal[s % 4]);
    // A zero-error assignment exists: K covers the distinct colors present.
    std::set<std::size_t> distinct;
    for (std::size_t s = 0; s < 40; ++s) distinct.insert(s % 4);
    REQUIRE(distinct.size() <= shape.entries);

    const auto m = init_model(shape, std::vector<std::uint32_t>(40, 0), {0}, 5);
    FitHyper h;
    h.iters = 600;
    h.seed = 1;
    const auto fit = fit_appearance(m, t, h);
    const auto hard = export_compact(fit.model);
    CHECK(mean_color_error(hard, t, 1.0) < 0.02);
    std::set<std::uint32_t> used(hard.hard_index.begin(), hard.hard_index.end());
    CHECK(used.size() >= 4);
}

TEST_CASE("export picks the argmax and matches the cold soft model") {
    auto m = small_model(4, 6);
    m.logits.col(0) << 5, 1, 1;
    m.logits.col(1) << 1, 1, 1;
    const auto e = export_compact(m);
    CHECK(e.hard_index[0] == 0);
    CHECK(e.hard_index[1] == 0);
    CHECK(e.logits.size() == 0);
    CHECK(write_model(e) == write_model(export_compact(m)));
    CHECK(write_model(export_compact(e)) == write_model(e));
    for (std::size_t s = 0; s < 6; ++s) {
        Eigen::Index arg = 0;
        m.logits.col(static_cast<Eigen::Index>(s)).maxCoeff(&arg);
        CHECK(e.hard_index[s] == static_cast<std::uint32_t>(arg));
    }
    // Strands with a clear winner agree with the zero-noise, near-zero tau blend.
    double diff = 0.0;
    int n = 0;
    for (std::size_t s = 0; s < 6; ++s) {
        Eigen::VectorXd l = m.logits.col(static_cast<Eigen::Index>(s));
        std::sort(l.data(), l.data() + l.size());
        if (l[2] - l[1] < 0.5) continue;
        const auto a = decode_model_strand(e, s, 1.0);
        const auto b = decode_model_strand(m, s, 1e-4);
        for (Eigen::Index g = 0; g < 5; ++g)
            for (int ch = 0; ch < 3; ++ch, ++n) diff += std::abs(dc_color(a, g, ch) - dc_color(b, g, ch));
    }
    REQUIRE(n > 0);
    CHECK(diff / n < 1e-3);
}

TEST_CASE("model files round trip") {
    const auto soft = small_model(8, 6);
    const auto back = parse_model(write_model(soft));
    CHECK(back.logits == soft.logits);
    CHECK(back.codebooks[1].entries == soft.codebooks[1].entries);
    CHECK(back.decoder.w2 == soft.decoder.w2);
    CHECK(back.opacity == soft.opacity);
    CHECK(back.strand_card == soft.strand_card);
    CHECK(!back.exported());

    const auto hard = export_compact(soft);
    const auto bytes = write_model(hard);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CGHM");
    const auto hb = parse_model(bytes);
    CHECK(hb.hard_index == hard.hard_index);
    CHECK(write_model(hb) == bytes);
    CHECK(decode_model_strand(hb, 3, 1.0) == decode_model_strand(hard, 3, 1.0));

    auto extra = bytes;
    extra.push_back(1);
    CHECK_THROWS_AS(parse_model(extra), Error);
    const auto man = model_manifest(hard);
    CHECK(man["format"] == "CGHM");
    CHECK(man["total_bytes"].get<std::size_t>() == bytes.size());
}

}
