#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cghair/synth.h"
#include "cghair/uvmap.h"

namespace cghair {

// Box-downsample to grid x grid, flatten row-major, subtract the mean, and
// scale to unit L2 norm (an all-zero vector stays zero).
Eigen::VectorXd texture_feature(const StrandTexture& t, std::size_t grid = 32);

struct CardClusters {
    std::vector<std::uint32_t> assignments;  // card -> texture cluster
    std::size_t n_t = 0;
    double inertia = 0.0;
};

CardClusters cluster_cards(std::span<const Eigen::VectorXd> features, std::size_t n_t, std::uint64_t seed,
                           int threads = 1);

// softmax((logits + noise) / tau)
Eigen::VectorXd gumbel_softmax(const Eigen::VectorXd& logits, double tau, const Eigen::VectorXd& noise);

struct AppearanceCodebook {
    Eigen::MatrixXd entries;  // K x D
};

Eigen::VectorXd blend_codebook(const Eigen::VectorXd& weights, const AppearanceCodebook& cb);

// D -> H (max(x, 0)) -> G*C, reshaped to G rows of C SH coefficients.
struct DecoderMLP {
    Eigen::MatrixXd w1;  // H x D
    Eigen::VectorXd b1;  // H
    Eigen::MatrixXd w2;  // (G*C) x H
    Eigen::VectorXd b2;  // G*C
    std::size_t gaussians = 0;
    std::size_t sh_degree = 1;

    std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
    std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
    std::size_t coeffs() const;
};

Eigen::MatrixXd decode_strand_appearance(const Eigen::VectorXd& feature, const DecoderMLP& dec);

struct ModelShape {
    std::size_t strands = 0;       // N_S
    std::size_t gaussians = 99;    // G
    std::size_t clusters = 64;     // N_T
    std::size_t entries = 10;      // K
    std::size_t feature_dim = 64;  // D
    std::size_t hidden = 256;      // H
    std::size_t sh_degree = 1;
};

struct CompactAppearanceModel {
    ModelShape shape;
    std::vector<AppearanceCodebook> codebooks;  // N_T
    std::vector<std::uint32_t> strand_card;     // strand -> card
    std::vector<std::uint32_t> card_cluster;    // card -> texture cluster
    Eigen::MatrixXd logits;                     // K x N_S (empty once exported)
    std::vector<std::uint32_t> hard_index;      // per strand, set by export_compact
    DecoderMLP decoder;
    Eigen::MatrixXd opacity;                    // G x N_S, in [0, 1]
    double tau = 1.0;                           // temperature reached by fitting

    bool exported() const { return !hard_index.empty(); }
    std::uint32_t cluster_of(std::size_t strand) const { return card_cluster[strand_card[strand]]; }
};

// Codebooks ~ N(0, 0.01), logits ~ N(0, 1), decoder uniform in +-1/sqrt(fan_in)
// with biases at zero. Output rows above SH degree 0 start at zero: the color
// objective never reaches them.
CompactAppearanceModel init_model(const ModelShape& shape, std::vector<std::uint32_t> strand_card,
                                  std::vector<std::uint32_t> card_cluster, std::uint64_t seed,
                                  double initial_opacity = 0.9);

void validate_routing(const CompactAppearanceModel& m);

// Per-Gaussian SH (G x C) for one strand: the hard entry for exported
// models, otherwise the zero-noise soft blend at temperature `tau`.
Eigen::MatrixXd decode_model_strand(const CompactAppearanceModel& m, std::size_t strand, double tau);

struct FitHyper {
    std::size_t iters = 2000;
    double step = 1.0;              // base step, backtracked by halving
    double logit_step_scale = 10.0; // logits move faster than the rest
    double lambda_o = 0.01;
    double tau_start = 1.0;
    double tau_end = 0.1;
    bool gumbel_noise = true;
    double noise_warmup = 0.0;      // leading fraction of iterations run without noise
    std::uint64_t seed = 0;
    int threads = 1;
    std::size_t chunk = 64;         // strands per reduction block
    int max_halvings = 30;
};

// Temperature at iteration `it` of `iters`, exponential from start to end.
double temperature_at(const FitHyper& h, std::size_t it);

struct ModelGrad {
    std::vector<Eigen::MatrixXd> codebooks;  // N_T of K x D
    Eigen::MatrixXd logits;
    Eigen::MatrixXd w1, w2;
    Eigen::VectorXd b1, b2;
    Eigen::MatrixXd opacity;
};

struct LossTerms {
    double color = 0.0;    // mean squared color error
    double opacity = 0.0;  // lambda_o * mean squared adjacent opacity difference
    double total() const { return color + opacity; }
};

// Distillation loss at temperature tau with Gumbel noise (K x N_S, may be
// zero). Fills `grad` with exact gradients when non-null.
LossTerms distillation_loss(const CompactAppearanceModel& m, const AppearanceTargets& targets, double tau,
                            const Eigen::MatrixXd& noise, double lambda_o, ModelGrad* grad, int threads = 1,
                            std::size_t chunk = 64);

struct FitStep {
    std::size_t iter = 0;
    double tau = 0.0;
    double loss_before = 0.0;
    double loss_after = 0.0;
    double step = 0.0;
    bool accepted = false;
};

struct FitResult {
    CompactAppearanceModel model;
    std::vector<FitStep> trace;
};

FitResult fit_appearance(const CompactAppearanceModel& model, const AppearanceTargets& targets, const FitHyper& hyper);

// Hard argmax routing; every parameter rounded to float32 so the in-memory
// model matches its serialized form.
CompactAppearanceModel export_compact(const CompactAppearanceModel& model);

// Mean absolute per-channel difference between decoded (clamped) DC colors
// and the targets.
double mean_color_error(const CompactAppearanceModel& m, const AppearanceTargets& targets, double tau);

}  // namespace cghair
