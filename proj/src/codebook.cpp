#include "cghair/codebook.h"

#include <algorithm>
#include <cmath>

#include "cghair/error.h"
#include "cghair/kmeans.h"
#include "cghair/random.h"
#include "cghair/sh.h"

namespace cghair {

Eigen::VectorXd texture_feature(const StrandTexture& t, std::size_t grid) {
    if (grid == 0 || grid > std::min(t.width, t.height))
        throw Error(ErrorCode::InvalidArgument, "grid must be in [1, min(width, height)]");
    Eigen::VectorXd f(static_cast<Eigen::Index>(grid * grid));
    for (std::size_t gy = 0; gy < grid; ++gy) {
        const std::size_t y0 = gy * t.height / grid, y1 = (gy + 1) * t.height / grid;
        for (std::size_t gx = 0; gx < grid; ++gx) {
            const std::size_t x0 = gx * t.width / grid, x1 = (gx + 1) * t.width / grid;
            double s = 0.0;
            for (std::size_t y = y0; y < y1; ++y)
                for (std::size_t x = x0; x < x1; ++x) s += t.at(x, y);
            f(static_cast<Eigen::Index>(gy * grid + gx)) = s / static_cast<double>((y1 - y0) * (x1 - x0));
        }
    }
    f.array() -= f.mean();
    const double n = f.norm();
    if (n > 0.0) f /= n;
    return f;
}

CardClusters cluster_cards(std::span<const Eigen::VectorXd> features, std::size_t n_t, std::uint64_t seed,
                           int threads) {
    if (features.empty()) throw Error(ErrorCode::EmptyInput, "no card features");
    Eigen::MatrixXd x(features.front().size(), static_cast<Eigen::Index>(features.size()));
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].size() != x.rows()) throw Error(ErrorCode::DimensionMismatch, "feature lengths differ");
        x.col(static_cast<Eigen::Index>(i)) = features[i];
    }
    KMeansOptions opts;
    opts.k = n_t;
    opts.seed = seed;
    opts.threads = threads;
    const auto km = kmeans(x, opts);
    return {km.assignments, n_t, km.inertia};
}

Eigen::VectorXd gumbel_softmax(const Eigen::VectorXd& logits, double tau, const Eigen::VectorXd& noise) {
    if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "tau must be positive");
    if (noise.size() != logits.size()) throw Error(ErrorCode::LengthMismatch, "noise and logits differ in length");
    Eigen::VectorXd z = (logits + noise) / tau;
    z.array() -= z.maxCoeff();
    Eigen::VectorXd e = z.array().exp();
    return e / e.sum();
}

Eigen::VectorXd blend_codebook(const Eigen::VectorXd& weights, const AppearanceCodebook& cb) {
    if (weights.size() != cb.entries.rows())
        throw Error(ErrorCode::LengthMismatch, "weights do not match codebook size");
    return cb.entries.transpose() * weights;
}

std::size_t DecoderMLP::coeffs() const { return sh_coeff_count(sh_degree); }

Eigen::MatrixXd decode_strand_appearance(const Eigen::VectorXd& feature, const DecoderMLP& dec) {
    if (static_cast<std::size_t>(feature.size()) != dec.input_dim())
        throw Error(ErrorCode::DimensionMismatch, "feature length does not match decoder input");
    const Eigen::VectorXd h = (dec.w1 * feature + dec.b1).cwiseMax(0.0);
    const Eigen::VectorXd out = dec.w2 * h + dec.b2;
    const auto c = static_cast<Eigen::Index>(dec.coeffs());
    // Row-major reshape: row g holds out[g*C .. g*C + C).
    Eigen::MatrixXd sh(static_cast<Eigen::Index>(dec.gaussians), c);
    for (Eigen::Index g = 0; g < sh.rows(); ++g) sh.row(g) = out.segment(g * c, c).transpose();
    return sh;
}

CompactAppearanceModel init_model(const ModelShape& shape, std::vector<std::uint32_t> strand_card,
                                  std::vector<std::uint32_t> card_cluster, std::uint64_t seed,
                                  double initial_opacity) {
    if (shape.entries < 1 || shape.feature_dim < 1 || shape.hidden < 1 || shape.gaussians < 1 || shape.clusters < 1)
        throw Error(ErrorCode::InvalidArgument, "model dimensions must be >= 1");
    if (shape.sh_degree > kMaxShDegree) throw Error(ErrorCode::InvalidArgument, "SH degree above 3");
    Rng rng(seed);
    CompactAppearanceModel m;
    m.shape = shape;
    m.strand_card = std::move(strand_card);
    m.card_cluster = std::move(card_cluster);
    m.shape.strands = m.strand_card.size();
    const auto k = static_cast<Eigen::Index>(shape.entries);
    const auto d = static_cast<Eigen::Index>(shape.feature_dim);
    const auto h = static_cast<Eigen::Index>(shape.hidden);
    const auto n = static_cast<Eigen::Index>(m.shape.strands);
    const auto g = static_cast<Eigen::Index>(shape.gaussians);
    const auto c = static_cast<Eigen::Index>(sh_coeff_count(shape.sh_degree));

    m.codebooks.resize(shape.clusters);
    for (auto& cb : m.codebooks) {
        cb.entries.resize(k, d);
        for (Eigen::Index i = 0; i < cb.entries.size(); ++i) cb.entries.data()[i] = rng.normal(0.0, 0.1);
    }
    m.logits.resize(k, n);
    for (Eigen::Index i = 0; i < m.logits.size(); ++i) m.logits.data()[i] = rng.normal();

    auto& dec = m.decoder;
    dec.gaussians = shape.gaussians;
    dec.sh_degree = shape.sh_degree;
    const double a1 = 1.0 / std::sqrt(static_cast<double>(d));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(h));
    dec.w1.resize(h, d);
    for (Eigen::Index i = 0; i < dec.w1.size(); ++i) dec.w1.data()[i] = rng.uniform(-a1, a1);
    dec.b1 = Eigen::VectorXd::Zero(h);
    dec.w2 = Eigen::MatrixXd::Zero(g * c, h);
    for (Eigen::Index gi = 0; gi < g; ++gi)
        for (Eigen::Index ch = 0; ch < 3; ++ch)
            for (Eigen::Index j = 0; j < h; ++j) dec.w2(gi * c + ch, j) = rng.uniform(-a2, a2);
    dec.b2 = Eigen::VectorXd::Zero(g * c);

    m.opacity = Eigen::MatrixXd::Constant(g, n, std::clamp(initial_opacity, 0.0, 1.0));
    validate_routing(m);
    return m;
}

void validate_routing(const CompactAppearanceModel& m) {
    if (m.strand_card.size() != m.shape.strands)
        throw Error(ErrorCode::InconsistentCounts, "routing does not cover every strand");
    for (auto c : m.strand_card)
        if (c >= m.card_cluster.size()) throw Error(ErrorCode::InconsistentCounts, "strand routed to unknown card");
    for (auto t : m.card_cluster)
        if (t >= m.codebooks.size()) throw Error(ErrorCode::InconsistentCounts, "card routed to unknown cluster");
}

Eigen::MatrixXd decode_model_strand(const CompactAppearanceModel& m, std::size_t strand, double tau) {
    const auto& cb = m.codebooks[m.cluster_of(strand)];
    if (m.exported()) {
        const Eigen::VectorXd f = cb.entries.row(m.hard_index[strand]).transpose();
        return decode_strand_appearance(f, m.decoder);
    }
    const auto s = static_cast<Eigen::Index>(strand);
    const Eigen::VectorXd w = gumbel_softmax(m.logits.col(s), tau, Eigen::VectorXd::Zero(m.logits.rows()));
    return decode_strand_appearance(blend_codebook(w, cb), m.decoder);
}

CompactAppearanceModel export_compact(const CompactAppearanceModel& model) {
    auto round = [](auto& mat) {
        for (Eigen::Index i = 0; i < mat.size(); ++i)
            mat.data()[i] = static_cast<double>(static_cast<float>(mat.data()[i]));
    };
    CompactAppearanceModel m = model;
    if (!m.exported()) {
        m.hard_index.resize(m.shape.strands);
        for (std::size_t s = 0; s < m.shape.strands; ++s) {
            Eigen::Index arg = 0;
            m.logits.col(static_cast<Eigen::Index>(s)).maxCoeff(&arg);  // first maximum wins ties
            m.hard_index[s] = static_cast<std::uint32_t>(arg);
        }
        m.logits.resize(0, 0);
    }
    for (auto& cb : m.codebooks) round(cb.entries);
    round(m.decoder.w1);
    round(m.decoder.b1);
    round(m.decoder.w2);
    round(m.decoder.b2);
    round(m.opacity);
    m.tau = static_cast<double>(static_cast<float>(m.tau));
    return m;
}

double mean_color_error(const CompactAppearanceModel& m, const AppearanceTargets& targets, double tau) {
    if (targets.strand_count != m.shape.strands || targets.gaussians_per_strand != m.shape.gaussians)
        throw Error(ErrorCode::ShapeMismatch, "targets do not match the model");
    double err = 0.0;
    for (std::size_t s = 0; s < m.shape.strands; ++s) {
        const Eigen::MatrixXd sh = decode_model_strand(m, s, tau);
        for (std::size_t g = 0; g < m.shape.gaussians; ++g)
            for (int ch = 0; ch < 3; ++ch) {
                const double color =
                    std::max(0.0, kShColorOffset + kShC0 * sh(static_cast<Eigen::Index>(g), ch));
                err += std::abs(color - targets.at(s, g)[ch]);
            }
    }
    return err / static_cast<double>(3 * m.shape.strands * m.shape.gaussians);
}

}  // namespace cghair
