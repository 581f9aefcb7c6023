#include "cghair/model_io.h"

#include <string>

#include "cghair/binary_io.h"
#include "cghair/error.h"
#include "cghair/sh.h"

namespace cghair {

namespace {

struct Section {
    const char* name;
    std::size_t count;
    std::size_t width;  // bytes per element
};

std::vector<Section> layout(const CompactAppearanceModel& m) {
    const auto& s = m.shape;
    const std::size_t real = m.exported() ? 4 : 8;
    const std::size_t c = sh_coeff_count(s.sh_degree);
    std::vector<Section> out;
    out.push_back({"header", 4 + 8 * 4, 1});
    out.push_back({"strand_card", s.strands, 4});
    out.push_back({"card_cluster", m.card_cluster.size(), 4});
    if (m.exported())
        out.push_back({"hard_index", s.strands, 4});
    else
        out.push_back({"logits", s.entries * s.strands, real});
    out.push_back({"codebooks", s.clusters * s.entries * s.feature_dim, real});
    out.push_back({"w1", s.hidden * s.feature_dim, real});
    out.push_back({"b1", s.hidden, real});
    out.push_back({"w2", s.gaussians * c * s.hidden, real});
    out.push_back({"b2", s.gaussians * c, real});
    out.push_back({"opacity", s.gaussians * s.strands, real});
    out.push_back({"tau", 1, real});
    return out;
}

void put(ByteWriter& w, double v, bool f32) {
    if (f32)
        w.f32(static_cast<float>(v));
    else
        w.f64(v);
}

double get(ByteReader& r, bool f32) { return f32 ? static_cast<double>(r.f32()) : r.f64(); }

void put_row_major(ByteWriter& w, const Eigen::MatrixXd& a, bool f32) {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) put(w, a(i, j), f32);
}

Eigen::MatrixXd get_row_major(ByteReader& r, std::size_t rows, std::size_t cols, bool f32) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = get(r, f32);
    return a;
}

std::uint32_t u32_of(std::size_t v) { return static_cast<std::uint32_t>(v); }

}  // namespace

std::vector<std::uint8_t> write_model(const CompactAppearanceModel& m) {
    validate_routing(m);
    const bool f32 = m.exported();
    const auto& s = m.shape;
    ByteWriter w;
    if (f32)
        w.magic("CGHM");
    else
        w.magic("CGHF");
    for (std::size_t v : {s.strands, s.gaussians, s.clusters, s.entries, s.feature_dim, s.hidden, s.sh_degree,
                          m.card_cluster.size()})
        w.u32(u32_of(v));
    for (auto v : m.strand_card) w.u32(v);
    for (auto v : m.card_cluster) w.u32(v);
    if (f32) {
        for (auto v : m.hard_index) w.u32(v);
    } else {
        for (Eigen::Index i = 0; i < m.logits.size(); ++i) w.f64(m.logits.data()[i]);
    }
    for (const auto& cb : m.codebooks) put_row_major(w, cb.entries, f32);
    put_row_major(w, m.decoder.w1, f32);
    put_row_major(w, m.decoder.b1, f32);
    put_row_major(w, m.decoder.w2, f32);
    put_row_major(w, m.decoder.b2, f32);
    for (std::size_t st = 0; st < s.strands; ++st)
        for (std::size_t g = 0; g < s.gaussians; ++g)
            put(w, m.opacity(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(st)), f32);
    put(w, m.tau, f32);
    return w.take();
}

CompactAppearanceModel parse_model(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, "model shorter than its magic");
    const std::string magic(bytes.begin(), bytes.begin() + 4);
    bool f32 = false;
    if (magic == "CGHM")
        f32 = true;
    else if (magic != "CGHF")
        throw Error(ErrorCode::BadMagic, "not a model file");
    r.skip(4);

    CompactAppearanceModel m;
    auto& s = m.shape;
    s.strands = r.u32();
    s.gaussians = r.u32();
    s.clusters = r.u32();
    s.entries = r.u32();
    s.feature_dim = r.u32();
    s.hidden = r.u32();
    s.sh_degree = r.u32();
    const std::size_t cards = r.u32();
    if (s.sh_degree > kMaxShDegree) throw Error(ErrorCode::InconsistentCounts, "SH degree above 3");
    const std::size_t c = sh_coeff_count(s.sh_degree);

    m.strand_card.resize(s.strands);
    for (auto& v : m.strand_card) v = r.u32();
    m.card_cluster.resize(cards);
    for (auto& v : m.card_cluster) v = r.u32();
    if (f32) {
        m.hard_index.resize(s.strands);
        for (auto& v : m.hard_index) v = r.u32();
    } else {
        m.logits.resize(static_cast<Eigen::Index>(s.entries), static_cast<Eigen::Index>(s.strands));
        for (Eigen::Index i = 0; i < m.logits.size(); ++i) m.logits.data()[i] = r.f64();
    }
    m.codebooks.resize(s.clusters);
    for (auto& cb : m.codebooks) cb.entries = get_row_major(r, s.entries, s.feature_dim, f32);
    m.decoder.w1 = get_row_major(r, s.hidden, s.feature_dim, f32);
    m.decoder.b1 = get_row_major(r, s.hidden, 1, f32);
    m.decoder.w2 = get_row_major(r, s.gaussians * c, s.hidden, f32);
    m.decoder.b2 = get_row_major(r, s.gaussians * c, 1, f32);
    m.decoder.gaussians = s.gaussians;
    m.decoder.sh_degree = s.sh_degree;
    m.opacity.resize(static_cast<Eigen::Index>(s.gaussians), static_cast<Eigen::Index>(s.strands));
    for (std::size_t st = 0; st < s.strands; ++st)
        for (std::size_t g = 0; g < s.gaussians; ++g)
            m.opacity(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(st)) = get(r, f32);
    m.tau = get(r, f32);
    if (r.remaining() != 0) throw Error(ErrorCode::InconsistentCounts, "trailing bytes after model");
    validate_routing(m);
    return m;
}

nlohmann::json model_manifest(const CompactAppearanceModel& m) {
    nlohmann::json j;
    const auto& s = m.shape;
    j["format"] = m.exported() ? "CGHM" : "CGHF";
    j["precision"] = m.exported() ? "float32" : "float64";
    j["byte_order"] = "little";
    j["counts"] = {{"strands", s.strands},       {"gaussians", s.gaussians}, {"clusters", s.clusters},
                   {"entries", s.entries},       {"feature_dim", s.feature_dim}, {"hidden", s.hidden},
                   {"sh_degree", s.sh_degree},   {"coeffs", sh_coeff_count(s.sh_degree)},
                   {"cards", m.card_cluster.size()}};
    nlohmann::json sections = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& sec : layout(m)) {
        const std::size_t size = sec.count * sec.width;
        sections.push_back({{"name", sec.name}, {"offset", offset}, {"bytes", size}});
        offset += size;
    }
    j["sections"] = sections;
    j["total_bytes"] = offset;
    j["sh"] = {{"layout", "coeff[basis * 3 + channel]"},
               {"color", "max(0, 0.5 + sum_b coeff_b * Y_b(dir))"},
               {"color_offset", kShColorOffset},
               {"basis", "real SH, 3DGS sign convention"}};
    return j;
}

}  // namespace cghair
