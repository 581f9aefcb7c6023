#include <cmath>
#include <cstring>

#include "doctest.h"
#include "helpers.h"

#include "cghair/binary_io.h"
#include "cghair/error.h"
#include "cghair/hairio.h"

using namespace cghair;

namespace {

// Hand-assembled header so the parser is checked against the layout, not
// against our own writer.
std::vector<std::uint8_t> header(std::uint32_t strands, std::uint32_t points, std::uint32_t flags,
                                 std::uint32_t default_segments) {
    ByteWriter w;
    w.raw("HAIR", 4);
    w.u32(strands);
    w.u32(points);
    w.u32(flags);
    w.u32(default_segments);
    w.f32(1.0f);  // thickness
    w.f32(1.0f);  // transparency
    w.f32(0.5f);
    w.f32(0.5f);
    w.f32(0.5f);
    w.zeros(88);
    return w.take();
}

std::vector<std::uint8_t> minimal_file() {
    auto bytes = header(1, 2, hairfmt::kHasPoints, 1);
    ByteWriter w;
    for (float v : {0.f, 0.f, 0.f, 0.f, 0.f, 1.f}) w.f32(v);
    auto body = w.take();
    bytes.insert(bytes.end(), body.begin(), body.end());
    return bytes;
}

// Position of a point along the polyline, found by locating the segment it
// lies on.
double arc_position(const Polyline& line, const Vec3& p) {
    double run = 0.0, best = -1.0, best_d = 1e300;
    for (std::size_t i = 1; i < line.size(); ++i) {
        const Vec3 a = line[i - 1], b = line[i];
        const double len = (b - a).norm();
        const double t = std::clamp((p - a).dot(b - a) / (len * len), 0.0, 1.0);
        const double d = (a + t * (b - a) - p).norm();
        if (d < best_d) {
            best_d = d;
            best = run + t * len;
        }
        run += len;
    }
    return best;
}

}  // namespace

TEST_SUITE("hairio") {

TEST_CASE("minimal file parses to one two-point strand") {
    const Hairstyle h = parse_hair_file(minimal_file());
    REQUIRE(h.size() == 1);
    REQUIRE(h.strands[0].points.size() == 2);
    CHECK(h.strands[0].points[0] == Vec3(0, 0, 0));
    CHECK(h.strands[0].points[1] == Vec3(0, 0, 1));
}

TEST_CASE("corrupted magic is rejected") {
    auto bytes = minimal_file();
    bytes[0] = 'X';
    try {
        parse_hair_file(bytes);
        FAIL("expected BadMagic");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadMagic);
    }
}

TEST_CASE("short and inconsistent files") {
    auto bytes = minimal_file();
    std::vector<std::uint8_t> short_header(bytes.begin(), bytes.begin() + 60);
    CHECK_THROWS_AS(parse_hair_file(short_header), Error);
    try {
        parse_hair_file(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 4));
        FAIL("expected TruncatedFile");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TruncatedFile);
    }
    auto bad = header(1, 3, hairfmt::kHasPoints, 1);  // 1 segment means 2 points, not 3
    ByteWriter w;
    for (int i = 0; i < 9; ++i) w.f32(0.0f);
    auto body = w.take();
    bad.insert(bad.end(), body.begin(), body.end());
    try {
        parse_hair_file(bad);
        FAIL("expected InconsistentCounts");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InconsistentCounts);
    }
}

TEST_CASE("segments array and ignored attribute arrays") {
    // Two strands with 1 and 2 segments, plus thickness and color arrays.
    auto bytes = header(2, 5, hairfmt::kHasSegments | hairfmt::kHasPoints | hairfmt::kHasThickness | hairfmt::kHasColor, 7);
    ByteWriter w;
    w.u16(1);
    w.u16(2);
    for (int i = 0; i < 15; ++i) w.f32(static_cast<float>(i));
    for (int i = 0; i < 5; ++i) w.f32(0.1f);
    for (int i = 0; i < 15; ++i) w.f32(0.2f);
    auto body = w.take();
    bytes.insert(bytes.end(), body.begin(), body.end());
    const Hairstyle h = parse_hair_file(bytes);
    REQUIRE(h.size() == 2);
    CHECK(h.strands[0].points.size() == 2);
    CHECK(h.strands[1].points.size() == 3);
    CHECK(h.strands[1].points[2] == Vec3(12, 13, 14));
}

TEST_CASE("write then parse is the identity on points") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        Hairstyle h;
        for (int s = 0; s < 50; ++s) h.strands.push_back(testutil::random_float_strand(rng, 2 + rng.index(30)));
        const Hairstyle back = parse_hair_file(write_hair_file(h));
        REQUIRE(back.size() == h.size());
        for (std::size_t s = 0; s < h.size(); ++s) {
            REQUIRE(back.strands[s].points.size() == h.strands[s].points.size());
            for (std::size_t i = 0; i < h.strands[s].points.size(); ++i)
                for (int k = 0; k < 3; ++k) CHECK(back.strands[s].points[i][k] == h.strands[s].points[i][k]);
        }
    }
}

TEST_CASE("writer counts and empty input") {
    Hairstyle one;
    one.strands.push_back(Strand{{Vec3(0, 0, 0), Vec3(1, 0, 0)}});
    CHECK(parse_hair_file(write_hair_file(one)).size() == 1);
    try {
        write_hair_file(Hairstyle{});
        FAIL("expected EmptyHairstyle");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyHairstyle);
    }
}

TEST_CASE("blob round trip") {
    Rng rng(5);
    Hairstyle h;
    for (int s = 0; s < 7; ++s) h.strands.push_back(testutil::random_float_strand(rng, 12));
    h.points_per_strand = 12;
    const Hairstyle back = parse_cgh_blob(write_cgh_blob(h));
    REQUIRE(back.size() == 7);
    for (std::size_t s = 0; s < 7; ++s)
        for (std::size_t i = 0; i < 12; ++i) CHECK(back.strands[s].points[i] == h.strands[s].points[i]);
}

TEST_CASE("resampling a straight segment") {
    const Strand s{{Vec3(0, 0, 0), Vec3(0, 0, 9)}};
    const Strand r = resample_strand(s, 10);
    REQUIRE(r.points.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(r.points[static_cast<std::size_t>(i)].z() == doctest::Approx(i).epsilon(1e-15));
}

TEST_CASE("resampling uniform input changes nothing") {
    Strand s;
    for (int i = 0; i < 20; ++i) s.points.push_back(Vec3(0.5 * i, 0.0, 1.0));
    const Strand r = resample_strand(s, 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK((r.points[i] - s.points[i]).norm() < 1e-9);
}

TEST_CASE("resampled spacing is uniform in arc length") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Strand s = testutil::random_strand(rng, 3 + rng.index(40));
        const Strand r = resample_strand(s, 100);
        REQUIRE(r.points.size() == 100);
        CHECK(r.points.front() == s.points.front());
        CHECK(r.points.back() == s.points.back());
        std::vector<double> pos;
        for (const auto& p : r.points) pos.push_back(arc_position(s.points, p));
        const double total = pos.back() - pos.front();
        const double gap = total / 99.0;
        for (std::size_t i = 1; i < pos.size(); ++i) CHECK(std::abs((pos[i] - pos[i - 1]) - gap) <= 1e-6 * gap);
    }
}

TEST_CASE("resampling equal-chord input is a fixed point") {
    // points at equal angles on an arc: chords all match, so resampling keeps them
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const double r = 0.5 + rng.uniform();
        const double span = 0.5 + 2.0 * rng.uniform();
        Strand arc;
        for (int i = 0; i < 40; ++i) {
            const double a = span * i / 39.0;
            arc.points.push_back(Vec3(r * std::cos(a), r * std::sin(a), 0.1 * trial));
        }
        const Strand again = resample_strand(arc, 40);
        for (std::size_t i = 0; i < 40; ++i) CHECK((arc.points[i] - again.points[i]).norm() < 1e-9);
    }
}

TEST_CASE("degenerate strands") {
    const Strand dot{{Vec3(1, 1, 1), Vec3(1, 1, 1)}};
    try {
        resample_strand(dot, 10);
        FAIL("expected DegenerateStrand");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateStrand);
    }
    const Strand dup{{Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)}};
    CHECK(merge_coincident(dup).points.size() == 3);

    Hairstyle h;
    h.strands = {dot, dup};
    const Hairstyle n = normalize_hairstyle(h, 5);
    REQUIRE(n.size() == 1);
    CHECK(n.points_per_strand == 5);
    CHECK(n.strands[0].points[2].x() == doctest::Approx(1.0));
    Hairstyle only_dots;
    only_dots.strands = {dot};
    CHECK_THROWS_AS(normalize_hairstyle(only_dots, 5), Error);
}

TEST_CASE("loading dispatches on magic") {
    const auto dir = testutil::temp_dir("hairio_load");
    write_file(dir / "a.hair", minimal_file());
    Hairstyle h;
    h.strands.push_back(Strand{{Vec3(0, 0, 0), Vec3(0, 1, 0)}});
    h.points_per_strand = 2;
    write_file(dir / "b.cgh", write_cgh_blob(h));
    CHECK(load_hairstyle(dir / "a.hair").strands[0].points[1].z() == 1.0);
    CHECK(load_hairstyle(dir / "b.cgh").strands[0].points[1].y() == 1.0);
    CHECK_THROWS_AS(load_hairstyle(dir / "missing.hair"), Error);
}

}
