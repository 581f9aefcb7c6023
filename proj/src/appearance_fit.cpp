#include <algorithm>
#include <cmath>

#include "cghair/codebook.h"
#include "cghair/error.h"
#include "cghair/parallel.h"
#include "cghair/random.h"
#include "cghair/sh.h"

namespace cghair {
namespace {

// Output rows of the decoder that hold the degree-0 coefficient of each
// Gaussian and channel, ordered g * 3 + channel.
std::vector<Eigen::Index> dc_rows(const CompactAppearanceModel& m) {
    const auto c = static_cast<Eigen::Index>(m.decoder.coeffs());
    std::vector<Eigen::Index> rows;
    rows.reserve(3 * m.shape.gaussians);
    for (Eigen::Index g = 0; g < static_cast<Eigen::Index>(m.shape.gaussians); ++g)
        for (Eigen::Index ch = 0; ch < 3; ++ch) rows.push_back(g * c + ch);
    return rows;
}

struct ChunkResult {
    double color = 0.0;
    Eigen::MatrixXd w1, w2dc;
    Eigen::VectorXd b1, b2dc;
    std::vector<Eigen::MatrixXd> codebooks;
};

ModelGrad zero_grad(const CompactAppearanceModel& m) {
    ModelGrad g;
    for (const auto& cb : m.codebooks) g.codebooks.push_back(Eigen::MatrixXd::Zero(cb.entries.rows(), cb.entries.cols()));
    g.logits = Eigen::MatrixXd::Zero(m.logits.rows(), m.logits.cols());
    g.w1 = Eigen::MatrixXd::Zero(m.decoder.w1.rows(), m.decoder.w1.cols());
    g.b1 = Eigen::VectorXd::Zero(m.decoder.b1.size());
    g.w2 = Eigen::MatrixXd::Zero(m.decoder.w2.rows(), m.decoder.w2.cols());
    g.b2 = Eigen::VectorXd::Zero(m.decoder.b2.size());
    g.opacity = Eigen::MatrixXd::Zero(m.opacity.rows(), m.opacity.cols());
    return g;
}

double opacity_term(const CompactAppearanceModel& m, double lambda_o) {
    const std::size_t n_s = m.shape.strands, n_g = m.shape.gaussians;
    if (n_g < 2 || n_s == 0 || lambda_o == 0.0) return 0.0;
    const double scale = lambda_o / static_cast<double>(n_s * (n_g - 1));
    const auto r = static_cast<Eigen::Index>(n_g - 1);
    return scale * (m.opacity.bottomRows(r) - m.opacity.topRows(r)).squaredNorm();
}

}  // namespace

double temperature_at(const FitHyper& h, std::size_t it) {
    if (h.iters <= 1) return h.tau_end;
    const double f = static_cast<double>(it) / static_cast<double>(h.iters - 1);
    return h.tau_start * std::pow(h.tau_end / h.tau_start, f);
}

LossTerms distillation_loss(const CompactAppearanceModel& m, const AppearanceTargets& targets, double tau,
                            const Eigen::MatrixXd& noise, double lambda_o, ModelGrad* grad, int threads,
                            std::size_t chunk) {
    if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "tau must be positive");
    if (targets.colors.empty()) throw Error(ErrorCode::EmptyTargets, "no targets");
    if (m.exported()) throw Error(ErrorCode::InvalidArgument, "exported models carry no logits");
    const std::size_t n_s = m.shape.strands;
    const std::size_t n_g = m.shape.gaussians;
    if (targets.strand_count != n_s || targets.gaussians_per_strand != n_g)
        throw Error(ErrorCode::ShapeMismatch, "targets do not match the model");
    if (noise.rows() != m.logits.rows() || noise.cols() != m.logits.cols())
        throw Error(ErrorCode::LengthMismatch, "noise must match the logits");

    const auto rows = dc_rows(m);
    const auto n_dc = static_cast<Eigen::Index>(rows.size());
    const auto& dec = m.decoder;
    Eigen::MatrixXd w2dc(n_dc, dec.w2.cols());
    Eigen::VectorXd b2dc(n_dc);
    for (Eigen::Index r = 0; r < n_dc; ++r) {
        w2dc.row(r) = dec.w2.row(rows[static_cast<std::size_t>(r)]);
        b2dc(r) = dec.b2(rows[static_cast<std::size_t>(r)]);
    }

    const double color_scale = 1.0 / static_cast<double>(3 * n_s * n_g);
    if (grad) *grad = zero_grad(m);

    chunk = std::max<std::size_t>(chunk, 1);
    const std::size_t n_chunks = (n_s + chunk - 1) / chunk;
    std::vector<ChunkResult> parts(n_chunks);

    parallel_for(n_chunks, threads, [&](std::size_t ci) {
        const std::size_t s0 = ci * chunk, s1 = std::min(n_s, s0 + chunk);
        const auto n = static_cast<Eigen::Index>(s1 - s0);
        ChunkResult& part = parts[ci];

        Eigen::MatrixXd feats(static_cast<Eigen::Index>(m.shape.feature_dim), n);
        Eigen::MatrixXd pis(m.logits.rows(), n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto s = static_cast<Eigen::Index>(s0) + j;
            pis.col(j) = gumbel_softmax(m.logits.col(s), tau, noise.col(s));
            feats.col(j) = m.codebooks[m.cluster_of(static_cast<std::size_t>(s))].entries.transpose() * pis.col(j);
        }
        const Eigen::MatrixXd pre = (dec.w1 * feats).colwise() + dec.b1;
        const Eigen::MatrixXd hid = pre.cwiseMax(0.0);
        Eigen::MatrixXd err = ((w2dc * hid).colwise() + b2dc) * kShC0;
        err.array() += kShColorOffset;
        for (Eigen::Index j = 0; j < n; ++j) {
            const std::size_t s = s0 + static_cast<std::size_t>(j);
            for (std::size_t g = 0; g < n_g; ++g)
                for (int ch = 0; ch < 3; ++ch) err(static_cast<Eigen::Index>(3 * g + ch), j) -= targets.at(s, g)[ch];
        }
        part.color = err.squaredNorm();
        if (!grad) return;

        const Eigen::MatrixXd d_out = err * (2.0 * color_scale * kShC0);
        part.w2dc = d_out * hid.transpose();
        part.b2dc = d_out.rowwise().sum();
        const Eigen::MatrixXd d_pre = ((w2dc.transpose() * d_out).array() * (pre.array() > 0.0).cast<double>()).matrix();
        part.w1 = d_pre * feats.transpose();
        part.b1 = d_pre.rowwise().sum();
        const Eigen::MatrixXd d_feat = dec.w1.transpose() * d_pre;

        part.codebooks.assign(m.codebooks.size(), Eigen::MatrixXd());
        for (Eigen::Index j = 0; j < n; ++j) {
            const std::size_t s = s0 + static_cast<std::size_t>(j);
            const std::uint32_t c = m.cluster_of(s);
            const auto& entries = m.codebooks[c].entries;
            auto& dcb = part.codebooks[c];
            if (dcb.size() == 0) dcb = Eigen::MatrixXd::Zero(entries.rows(), entries.cols());
            dcb.noalias() += pis.col(j) * d_feat.col(j).transpose();
            const Eigen::VectorXd d_pi = entries * d_feat.col(j);
            const Eigen::VectorXd d_z = pis.col(j).cwiseProduct(d_pi.array().matrix() - Eigen::VectorXd::Constant(d_pi.size(), pis.col(j).dot(d_pi)));
            grad->logits.col(static_cast<Eigen::Index>(s)) = d_z / tau;
        }
    });

    LossTerms loss;
    for (const auto& p : parts) loss.color += p.color;
    loss.color *= color_scale;

    loss.opacity = opacity_term(m, lambda_o);
    if (grad && n_g > 1 && lambda_o != 0.0) {
        const double scale = lambda_o / static_cast<double>(n_s * (n_g - 1));
        const Eigen::MatrixXd diff =
            m.opacity.bottomRows(static_cast<Eigen::Index>(n_g - 1)) - m.opacity.topRows(static_cast<Eigen::Index>(n_g - 1));
        grad->opacity.bottomRows(static_cast<Eigen::Index>(n_g - 1)) += 2.0 * scale * diff;
        grad->opacity.topRows(static_cast<Eigen::Index>(n_g - 1)) -= 2.0 * scale * diff;
    }

    if (grad) {
        Eigen::MatrixXd gw2dc = Eigen::MatrixXd::Zero(n_dc, dec.w2.cols());
        Eigen::VectorXd gb2dc = Eigen::VectorXd::Zero(n_dc);
        for (const auto& p : parts) {
            gw2dc += p.w2dc;
            gb2dc += p.b2dc;
            grad->w1 += p.w1;
            grad->b1 += p.b1;
            for (std::size_t c = 0; c < p.codebooks.size(); ++c)
                if (p.codebooks[c].size() != 0) grad->codebooks[c] += p.codebooks[c];
        }
        for (Eigen::Index r = 0; r < n_dc; ++r) {
            grad->w2.row(rows[static_cast<std::size_t>(r)]) = gw2dc.row(r);
            grad->b2(rows[static_cast<std::size_t>(r)]) = gb2dc(r);
        }
    }
    return loss;
}

FitResult fit_appearance(const CompactAppearanceModel& model, const AppearanceTargets& targets, const FitHyper& hyper) {
    if (targets.colors.empty()) throw Error(ErrorCode::EmptyTargets, "no targets");
    validate_routing(model);
    if (targets.strand_count != model.shape.strands || targets.gaussians_per_strand != model.shape.gaussians)
        throw Error(ErrorCode::ShapeMismatch, "targets do not match the model");
    if (!(hyper.step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be positive");

    FitResult res{model, {}};
    if (hyper.iters == 0) return res;
    CompactAppearanceModel& m = res.model;

    // Per-class step scales: each parameter's step is divided by the share of
    // the objective it touches, so shared and per-strand parameters move at
    // comparable rates under one global step.
    const auto n_s = static_cast<double>(m.shape.strands);
    std::vector<double> cluster_strands(m.codebooks.size(), 0.0);
    for (std::size_t s = 0; s < m.shape.strands; ++s) cluster_strands[m.cluster_of(s)] += 1.0;
    std::vector<double> cb_scale(m.codebooks.size());
    for (std::size_t c = 0; c < cb_scale.size(); ++c) cb_scale[c] = n_s / std::max(1.0, cluster_strands[c]);
    const double logit_scale = hyper.logit_step_scale * n_s;
    const double opacity_scale = n_s * static_cast<double>(std::max<std::size_t>(1, m.shape.gaussians - 1));

    auto apply = [&](const CompactAppearanceModel& base, const ModelGrad& g, double eta) {
        CompactAppearanceModel t = base;
        for (std::size_t c = 0; c < t.codebooks.size(); ++c) t.codebooks[c].entries -= eta * cb_scale[c] * g.codebooks[c];
        t.logits -= eta * logit_scale * g.logits;
        t.decoder.w1 -= eta * g.w1;
        t.decoder.b1 -= eta * g.b1;
        t.decoder.w2 -= eta * g.w2;
        t.decoder.b2 -= eta * g.b2;
        t.opacity = (t.opacity - eta * opacity_scale * g.opacity).cwiseMax(0.0).cwiseMin(1.0);
        return t;
    };

    Rng rng(hyper.seed);
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(m.logits.rows(), m.logits.cols());
    double eta = hyper.step;
    for (std::size_t it = 0; it < hyper.iters; ++it) {
        const double tau = temperature_at(hyper, it);
        const bool noisy = hyper.gumbel_noise &&
                           static_cast<double>(it) >= hyper.noise_warmup * static_cast<double>(hyper.iters);
        if (noisy)
            for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = rng.gumbel();

        ModelGrad g;
        const double before =
            distillation_loss(m, targets, tau, noise, hyper.lambda_o, &g, hyper.threads, hyper.chunk).total();
        FitStep rec{it, tau, before, before, 0.0, false};
        for (int h = 0; h <= hyper.max_halvings; ++h) {
            CompactAppearanceModel trial = apply(m, g, eta);
            const double after =
                distillation_loss(trial, targets, tau, noise, hyper.lambda_o, nullptr, hyper.threads, hyper.chunk)
                    .total();
            if (after <= before) {
                m = std::move(trial);
                rec.loss_after = after;
                rec.step = eta;
                rec.accepted = true;
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
        }
        m.tau = tau;
        res.trace.push_back(rec);
    }
    return res;
}

}  // namespace cghair
