#include "cghair/pipeline.h"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "cghair/binary_io.h"
#include "cghair/hairio.h"
#include "cghair/kmeans.h"
#include "cghair/model_io.h"
#include "cghair/parallel.h"
#include "cghair/report.h"
#include "cghair/sh.h"

namespace cghair {

namespace fs = std::filesystem;

namespace {

// Independent streams per stage from the one configured seed.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

enum SeedTag : std::uint64_t { kSeedColors = 1, kSeedCluster, kSeedCardCluster, kSeedInit, kSeedFit };

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<StrandCluster> clusters_from_assignments(const Hairstyle& h, std::span<const std::uint32_t> assign,
                                                     std::uint32_t groups) {
    if (assign.size() != h.size()) throw Error(ErrorCode::ShapeMismatch, "cluster index does not match hairstyle");
    std::vector<std::vector<std::uint32_t>> members(groups);
    for (std::size_t s = 0; s < assign.size(); ++s) {
        if (assign[s] >= groups) throw Error(ErrorCode::InconsistentCounts, "cluster index out of range");
        members[assign[s]].push_back(static_cast<std::uint32_t>(s));
    }
    // Empty clusters are dropped and the rest renumbered, so card i is cluster i.
    std::vector<StrandCluster> out;
    for (auto& m : members) {
        if (m.empty()) continue;
        StrandCluster c;
        c.id = static_cast<std::uint32_t>(out.size());
        c.members = std::move(m);
        const std::size_t n = h.strands[c.members.front()].points.size();
        c.guide.points.assign(n, Vec3::Zero());
        for (auto s : c.members)
            for (std::size_t i = 0; i < n; ++i) c.guide.points[i] += h.strands[s].points[i];
        for (auto& p : c.guide.points) p /= static_cast<double>(c.members.size());
        out.push_back(std::move(c));
    }
    return out;
}

std::string texture_name(std::size_t card) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "card_%04zu.pgm", card);
    return buf;
}

std::string view_name(const char* prefix, std::size_t i) { return std::string(prefix) + "_view" + std::to_string(i) + ".ppm"; }

Hairstyle reconstructed_geometry(const Hairstyle& h, std::span<const HairCard> cards,
                                 std::span<const StrandUVSet> uv) {
    if (uv.size() != h.size()) throw Error(ErrorCode::ShapeMismatch, "uv sets do not match hairstyle");
    Hairstyle r;
    r.points_per_strand = h.points_per_strand;
    r.strands.resize(h.size());
    for (const auto& set : uv) {
        if (set.strand >= h.size() || set.card >= cards.size())
            throw Error(ErrorCode::InconsistentCounts, "uv set routing out of range");
        r.strands[set.strand].points = reconstruct_points(set, cards[set.card]);
    }
    return r;
}

std::vector<Gaussian> build_gaussians(const Hairstyle& geom, double d, const Eigen::MatrixXd& opacity,
                                      const std::function<Eigen::MatrixXd(std::size_t)>& sh_of, int threads) {
    const std::size_t g = geom.strands.front().points.size() - 1;
    std::vector<Gaussian> out(geom.size() * g);
    parallel_for(geom.size(), threads, [&](std::size_t s) {
        const Eigen::VectorXd col = opacity.col(static_cast<Eigen::Index>(s));
        const auto gs = strand_to_gaussians(geom.strands[s], d, std::span<const double>(col.data(), g), sh_of(s));
        std::copy(gs.gaussians.begin(), gs.gaussians.end(), out.begin() + static_cast<std::ptrdiff_t>(s * g));
    });
    return out;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, Logger log) : cfg_(std::move(cfg)), log_(std::move(log)) { cfg_.validate(); }

fs::path Pipeline::out(const std::string& name) const { return fs::path(cfg_.output) / name; }

void Pipeline::note(const std::string& msg) const {
    if (log_) log_(msg);
}

template <class F>
void Pipeline::guarded(const char* stage, F&& body) {
    note(std::string("[") + stage + "] start");
    try {
        body();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e.code(), e.what());
    } catch (const std::exception& e) {
        throw StageError(stage, ErrorCode::Io, e.what());
    }
    note(std::string("[") + stage + "] done");
}

const std::vector<std::string>& Pipeline::stage_names() {
    static const std::vector<std::string> names = {"synth",    "ingest", "cluster", "cards",  "uvmap", "codebook",
                                                   "fit",      "export", "render",  "report", "run"};
    return names;
}

void Pipeline::run_stage(const std::string& name) {
    if (name == "synth") return synth();
    if (name == "ingest") return ingest();
    if (name == "cluster") return cluster();
    if (name == "cards") return cards();
    if (name == "uvmap") return uvmap();
    if (name == "codebook") return codebook();
    if (name == "fit") return fit();
    if (name == "export") return export_model();
    if (name == "render") return render();
    if (name == "report") return report();
    if (name == "run") return run();
    throw StageError(name, ErrorCode::InvalidArgument, "unknown stage");
}

void Pipeline::synth() {
    guarded("synth", [&] {
        WispParams p = cfg_.synth;
        p.seed = cfg_.seed;
        const Hairstyle h = generate_wisp_hairstyle(p);
        const auto t = assign_synthetic_colors(h, cfg_.palette, cfg_.color_segments, stage_seed(cfg_.seed, kSeedColors));
        write_file(out(artifact::kSynthHair), write_cgh_blob(h));
        write_file(out(artifact::kSynthTargets), write_targets(t));
        note("  " + std::to_string(h.size()) + " strands");
    });
}

void Pipeline::ingest() {
    guarded("ingest", [&] {
        const bool synthetic = cfg_.input.empty();
        const fs::path src = synthetic ? out(artifact::kSynthHair) : fs::path(cfg_.input);
        const Hairstyle raw = load_hairstyle(src);
        const Hairstyle h = normalize_hairstyle(raw, cfg_.points_per_strand);
        AppearanceTargets t;
        bool from_synth = false;
        if (synthetic && h.size() == raw.size()) {
            t = parse_targets(read_file(out(artifact::kSynthTargets)));
            from_synth = t.strand_count == h.size() && t.gaussians_per_strand + 1 == h.points_per_strand;
        }
        if (!from_synth)
            t = assign_synthetic_colors(h, cfg_.palette, cfg_.color_segments, stage_seed(cfg_.seed, kSeedColors));
        write_file(out(artifact::kHair), write_cgh_blob(h));
        write_file(out(artifact::kTargets), write_targets(t));
        note("  " + std::to_string(h.size()) + " strands of " + std::to_string(h.points_per_strand) + " points");
    });
}

void Pipeline::cluster() {
    guarded("cluster", [&] {
        const Hairstyle h = parse_cgh_blob(read_file(out(artifact::kHair)));
        const auto clusters = cluster_strands(h, cfg_.n_c, stage_seed(cfg_.seed, kSeedCluster), cfg_.kmeans_iters,
                                              cfg_.threads);
        const auto assign = cluster_assignments(clusters, h.size());
        write_file(out(artifact::kClusters), write_index_file(assign, static_cast<std::uint32_t>(clusters.size())));
    });
}

void Pipeline::cards() {
    guarded("cards", [&] {
        const Hairstyle h = parse_cgh_blob(read_file(out(artifact::kHair)));
        std::uint32_t groups = 0;
        const auto assign = parse_index_file(read_file(out(artifact::kClusters)), &groups);
        const auto clusters = clusters_from_assignments(h, assign, groups);
        std::vector<HairCard> built(clusters.size());
        parallel_for(clusters.size(), cfg_.threads,
                     [&](std::size_t i) { built[i] = build_card(h, clusters[i], cfg_.cards); });
        const auto strand_card = cluster_assignments(clusters, h.size());
        write_file(out(artifact::kCards), write_cards(built));
        write_text_file(out(artifact::kCardsObj), cards_to_obj(built));
        write_file(out(artifact::kStrandCard),
                   write_index_file(strand_card, static_cast<std::uint32_t>(built.size())));
        note("  " + std::to_string(built.size()) + " cards");
    });
}

void Pipeline::uvmap() {
    guarded("uvmap", [&] {
        const Hairstyle h = parse_cgh_blob(read_file(out(artifact::kHair)));
        const auto cards = parse_cards(read_file(out(artifact::kCards)));
        const auto strand_card = parse_index_file(read_file(out(artifact::kStrandCard)));
        if (strand_card.size() != h.size()) throw Error(ErrorCode::ShapeMismatch, "strand->card index does not match");
        std::vector<StrandUVSet> sets(h.size());
        parallel_for(h.size(), cfg_.threads, [&](std::size_t s) {
            const HairCard& card = cards.at(strand_card[s]);
            sets[s] = optimize_strand_uv(card, h.strands[s].points, cfg_.uv_iters, cfg_.uv_step);
            sets[s].strand = static_cast<std::uint32_t>(s);
            sets[s].card = strand_card[s];
        });
        write_file(out(artifact::kUV), write_uv_sets(sets));

        std::vector<std::vector<StrandUVSet>> per_card(cards.size());
        for (const auto& set : sets) per_card[set.card].push_back(set);
        const fs::path dir = out(artifact::kTextureDir);
        fs::create_directories(dir);
        parallel_for(cards.size(), cfg_.threads, [&](std::size_t c) {
            const auto tex = rasterize_strand_texture(per_card[c], cfg_.texture_width, cfg_.texture_height);
            write_file(dir / texture_name(c), write_pgm(tex));
        });
    });
}

void Pipeline::codebook() {
    guarded("codebook", [&] {
        std::uint32_t n_cards = 0;
        parse_index_file(read_file(out(artifact::kStrandCard)), &n_cards);
        std::vector<Eigen::VectorXd> features(n_cards);
        const fs::path dir = out(artifact::kTextureDir);
        parallel_for(n_cards, cfg_.threads, [&](std::size_t c) {
            features[c] = texture_feature(parse_pgm(read_file(dir / texture_name(c))), cfg_.feature_grid);
        });
        const auto cc = cluster_cards(features, cfg_.n_t, stage_seed(cfg_.seed, kSeedCardCluster), cfg_.threads);
        write_file(out(artifact::kCardClusters), write_index_file(cc.assignments, static_cast<std::uint32_t>(cc.n_t)));
    });
}

void Pipeline::fit() {
    guarded("fit", [&] {
        const auto targets = parse_targets(read_file(out(artifact::kTargets)));
        auto strand_card = parse_index_file(read_file(out(artifact::kStrandCard)));
        auto card_cluster = parse_index_file(read_file(out(artifact::kCardClusters)));
        if (targets.strand_count != strand_card.size())
            throw Error(ErrorCode::ShapeMismatch, "targets do not match the strand count");

        ModelShape shape;
        shape.strands = targets.strand_count;
        shape.gaussians = targets.gaussians_per_strand;
        shape.clusters = cfg_.n_t;
        shape.entries = cfg_.k;
        shape.feature_dim = cfg_.d;
        shape.hidden = cfg_.hidden;
        shape.sh_degree = cfg_.sh_degree;
        const auto init = init_model(shape, std::move(strand_card), std::move(card_cluster),
                                     stage_seed(cfg_.seed, kSeedInit), cfg_.initial_opacity);
        FitHyper hyper = cfg_.fit;
        hyper.seed = stage_seed(cfg_.seed, kSeedFit);
        hyper.threads = cfg_.threads;
        const auto result = fit_appearance(init, targets, hyper);
        write_file(out(artifact::kFitted), write_model(result.model));

        std::ostringstream csv;
        csv << "iter,tau,loss_before,loss_after,step,accepted\n";
        for (const auto& s : result.trace)
            csv << s.iter << ',' << g17(s.tau) << ',' << g17(s.loss_before) << ',' << g17(s.loss_after) << ','
                << g17(s.step) << ',' << (s.accepted ? 1 : 0) << '\n';
        write_text_file(out(artifact::kFitTrace), csv.str());
        if (!result.trace.empty())
            note("  loss " + g17(result.trace.front().loss_before) + " -> " + g17(result.trace.back().loss_after));
    });
}

void Pipeline::export_model() {
    guarded("export", [&] {
        const auto fitted = parse_model(read_file(out(artifact::kFitted)));
        const auto model = export_compact(fitted);
        write_file(out(artifact::kModel), write_model(model));
        nlohmann::json manifest = model_manifest(model);
        manifest["config"] = config_to_json(cfg_);
        write_text_file(out(artifact::kManifest), manifest.dump(2) + "\n");
        write_text_file(out(artifact::kConfigEcho), config_to_ini(cfg_));
    });
}

void Pipeline::render() {
    guarded("render", [&] {
        const Hairstyle h = parse_cgh_blob(read_file(out(artifact::kHair)));
        const auto cards = parse_cards(read_file(out(artifact::kCards)));
        const auto uv = parse_uv_sets(read_file(out(artifact::kUV)));
        const auto model = parse_model(read_file(out(artifact::kModel)));
        const auto targets = parse_targets(read_file(out(artifact::kTargets)));
        const Hairstyle geom = reconstructed_geometry(h, cards, uv);
        if (model.shape.strands != geom.size() || model.shape.gaussians + 1 != h.points_per_strand)
            throw Error(ErrorCode::ShapeMismatch, "model does not match the hairstyle");

        const std::size_t c = sh_coeff_count(model.shape.sh_degree);
        const auto compact = build_gaussians(geom, cfg_.gaussian_radius, model.opacity,
                                             [&](std::size_t s) { return decode_model_strand(model, s, model.tau); },
                                             cfg_.threads);
        // Reference: each Gaussian stores its own target color, same geometry and opacities.
        const auto unique = build_gaussians(geom, cfg_.gaussian_radius, model.opacity,
                                            [&](std::size_t s) {
                                                Eigen::MatrixXd sh = Eigen::MatrixXd::Zero(
                                                    static_cast<Eigen::Index>(targets.gaussians_per_strand),
                                                    static_cast<Eigen::Index>(c));
                                                for (std::size_t g = 0; g < targets.gaussians_per_strand; ++g)
                                                    for (int ch = 0; ch < 3; ++ch)
                                                        sh(static_cast<Eigen::Index>(g), ch) =
                                                            sh_dc_for_color(targets.at(s, g)[ch]);
                                                return sh;
                                            },
                                            cfg_.threads);
        RenderOptions opts;
        opts.opaque = cfg_.opaque;
        opts.threads = cfg_.threads;
        const fs::path dir = out(artifact::kRenderDir);
        for (std::size_t i = 0; i < cfg_.cameras.size(); ++i) {
            write_file(dir / view_name("model", i), write_ppm(cghair::render(compact, cfg_.cameras[i], cfg_.background, opts)));
            write_file(dir / view_name("unique", i), write_ppm(cghair::render(unique, cfg_.cameras[i], cfg_.background, opts)));
        }
    });
}

void Pipeline::report() {
    guarded("report", [&] {
        const auto model = parse_model(read_file(out(artifact::kModel)));
        const auto targets = parse_targets(read_file(out(artifact::kTargets)));
        const Hairstyle h = parse_cgh_blob(read_file(out(artifact::kHair)));
        const auto cards = parse_cards(read_file(out(artifact::kCards)));
        const auto uv = parse_uv_sets(read_file(out(artifact::kUV)));
        const Hairstyle geom = reconstructed_geometry(h, cards, uv);

        AccountingConfig acc;
        acc.strands = model.shape.strands;
        acc.gaussians = model.shape.gaussians;
        acc.clusters = model.shape.clusters;
        acc.entries = model.shape.entries;
        acc.feature_dim = model.shape.feature_dim;
        acc.hidden = model.shape.hidden;
        acc.sh_degree = model.shape.sh_degree;
        acc.logits = LogitStorage::Float;
        const SizeReport float_mode = parameter_accounting(acc);
        acc.logits = LogitStorage::Index;
        const SizeReport index_mode = parameter_accounting(acc);

        QualityReport q;
        q.color_error = mean_color_error(model, targets, model.tau);
        q.position_error = position_error(h, geom);
        q.curvature_error = curvature_error(h, geom);
        double worst = std::numeric_limits<double>::infinity();
        nlohmann::json views = nlohmann::json::array();
        const fs::path dir = out(artifact::kRenderDir);
        for (std::size_t i = 0; i < cfg_.cameras.size(); ++i) {
            const auto a = parse_ppm(read_file(dir / view_name("model", i)));
            const auto b = parse_ppm(read_file(dir / view_name("unique", i)));
            const double p = psnr(a, b);
            worst = std::min(worst, p);
            views.push_back(std::isinf(p) ? nlohmann::json("inf") : nlohmann::json(p));
        }
        if (!cfg_.cameras.empty()) q.psnr_db = worst;

        std::string text = "== appearance size, float logits ==\n" + size_report_text(float_mode, q);
        text += "\n== appearance size, index logits ==\n" + size_report_text(index_mode);
        write_text_file(out(artifact::kReportText), text);

        nlohmann::json j;
        j["float_logits"] = size_report_json(float_mode, q);
        j["index_logits"] = size_report_json(index_mode);
        j["preview_psnr_per_view"] = views;
        j["cards"] = cards.size();
        j["texture_clusters"] = model.shape.clusters;
        write_text_file(out(artifact::kReportJson), j.dump(2) + "\n");
        note("  ratio " + g17(float_mode.ratio) + " (float logits), " + g17(index_mode.ratio) + " (index logits)");
    });
}

void Pipeline::run() {
    if (cfg_.input.empty()) synth();
    ingest();
    cluster();
    cards();
    uvmap();
    codebook();
    fit();
    export_model();
    render();
    report();
}

}  // namespace cghair
