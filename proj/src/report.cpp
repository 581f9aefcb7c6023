#include "cghair/report.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cghair/error.h"
#include "cghair/sh.h"

namespace cghair {

namespace {

template <class T>
T require(const std::optional<T>& v, const char* name) {
    if (!v) throw Error(ErrorCode::IncompleteConfig, std::string("missing ") + name);
    return *v;
}

void check_shape(const Hairstyle& a, const Hairstyle& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "strand counts differ");
    for (std::size_t s = 0; s < a.size(); ++s)
        if (a.strands[s].points.size() != b.strands[s].points.size())
            throw Error(ErrorCode::ShapeMismatch, "point counts differ at strand " + std::to_string(s));
}

}  // namespace

SizeReport parameter_accounting(const AccountingConfig& cfg) {
    SizeReport r;
    r.strands = require(cfg.strands, "strand count");
    r.gaussians = require(cfg.gaussians, "gaussians per strand");
    r.clusters = require(cfg.clusters, "texture cluster count");
    r.entries = require(cfg.entries, "codebook size");
    r.feature_dim = require(cfg.feature_dim, "feature dimension");
    r.hidden = require(cfg.hidden, "decoder width");
    r.sh_degree = require(cfg.sh_degree, "SH degree");
    r.logit_storage = require(cfg.logits, "logit storage");
    if (r.sh_degree > kMaxShDegree) throw Error(ErrorCode::InvalidArgument, "SH degree above 3");
    r.coeffs = sh_coeff_count(r.sh_degree);

    const std::uint64_t points = r.gaussians + 1;
    r.geometry_bytes = (r.strands * points * 3 + r.strands * r.gaussians) * 4;
    r.logit_bytes = r.logit_storage == LogitStorage::Float ? r.strands * r.entries * 4 : r.strands * 4;
    r.codebook_bytes = r.clusters * r.entries * r.feature_dim * 4;
    r.decoder_bytes = ((r.feature_dim + 1) * r.hidden + (r.hidden + 1) * r.gaussians * r.coeffs) * 4;
    r.appearance_bytes = r.logit_bytes + r.codebook_bytes + r.decoder_bytes;
    r.unique_bytes = r.strands * r.gaussians * r.coeffs * 4;
    r.ratio = r.appearance_bytes == 0 ? 0.0
                                      : static_cast<double>(r.unique_bytes) / static_cast<double>(r.appearance_bytes);
    return r;
}

double ratio_from_mb(double unique_mb, double model_mb) {
    if (!(model_mb > 0.0)) throw Error(ErrorCode::InvalidArgument, "model size must be positive");
    return unique_mb / model_mb;
}

double psnr(const Image& a, const Image& b, double max_value) {
    if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size())
        throw Error(ErrorCode::DimensionMismatch, "image sizes differ");
    if (a.rgb.empty()) throw Error(ErrorCode::DimensionMismatch, "empty image");
    double se = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = a.rgb[i] - b.rgb[i];
        se += d * d;
    }
    if (se == 0.0) return std::numeric_limits<double>::infinity();
    const double mse = se / static_cast<double>(a.rgb.size());
    return 10.0 * std::log10(max_value * max_value / mse);
}

double position_error(const Hairstyle& a, const Hairstyle& b) {
    check_shape(a, b);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < a.size(); ++s)
        for (std::size_t i = 0; i < a.strands[s].points.size(); ++i) {
            sum += (a.strands[s].points[i] - b.strands[s].points[i]).norm();
            ++n;
        }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<double> discrete_curvature(const Polyline& p) {
    std::vector<double> k;
    if (p.size() < 3) return k;
    k.reserve(p.size() - 2);
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
        const Vec3 e0 = p[i] - p[i - 1], e1 = p[i + 1] - p[i];
        const double l0 = e0.norm(), l1 = e1.norm();
        if (l0 == 0.0 || l1 == 0.0) {
            k.push_back(0.0);
            continue;
        }
        const double angle = std::atan2(e0.cross(e1).norm(), e0.dot(e1));
        k.push_back(angle / (0.5 * (l0 + l1)));
    }
    return k;
}

double curvature_error(const Hairstyle& a, const Hairstyle& b) {
    check_shape(a, b);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        const auto ka = discrete_curvature(a.strands[s].points);
        const auto kb = discrete_curvature(b.strands[s].points);
        for (std::size_t i = 0; i < ka.size(); ++i) sum += std::abs(ka[i] - kb[i]);
        n += ka.size();
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

const char* storage_name(LogitStorage s) { return s == LogitStorage::Float ? "float" : "index"; }

}  // namespace

std::string size_report_text(const SizeReport& r, const QualityReport& q) {
    std::ostringstream os;
    os << "N_S=" << r.strands << " G=" << r.gaussians << " N_T=" << r.clusters << " K=" << r.entries
       << " D=" << r.feature_dim << " H=" << r.hidden << " deg=" << r.sh_degree << " C=" << r.coeffs
       << " logits=" << storage_name(r.logit_storage) << "\n\n";
    os << std::left << std::setw(14) << "component" << std::right << std::setw(14) << "bytes" << std::setw(12)
       << "MB(1e6)" << std::setw(12) << "MiB(2^20)" << "\n";
    auto row = [&](const char* name, std::uint64_t b) {
        os << std::left << std::setw(14) << name << std::right << std::setw(14) << b << std::fixed
           << std::setprecision(4) << std::setw(12) << to_mb_decimal(b) << std::setw(12) << to_mb_binary(b) << "\n";
    };
    row("logits", r.logit_bytes);
    row("codebooks", r.codebook_bytes);
    row("decoder", r.decoder_bytes);
    row("appearance", r.appearance_bytes);
    row("unique", r.unique_bytes);
    row("geometry", r.geometry_bytes);
    os << "\nratio (unique / appearance) = " << std::setprecision(4) << r.ratio << "\n";
    if (q.color_error) os << "mean color error = " << std::setprecision(6) << *q.color_error << "\n";
    if (q.psnr_db) os << "preview PSNR (dB) = " << std::setprecision(3) << *q.psnr_db << "\n";
    if (q.position_error) os << "position error = " << std::setprecision(9) << *q.position_error << "\n";
    if (q.curvature_error) os << "curvature error = " << std::setprecision(9) << *q.curvature_error << "\n";
    return os.str();
}

nlohmann::json size_report_json(const SizeReport& r, const QualityReport& q) {
    nlohmann::json j;
    j["config"] = {{"strands", r.strands},     {"gaussians", r.gaussians}, {"clusters", r.clusters},
                   {"entries", r.entries},     {"feature_dim", r.feature_dim}, {"hidden", r.hidden},
                   {"sh_degree", r.sh_degree}, {"coeffs", r.coeffs},        {"logits", storage_name(r.logit_storage)}};
    auto bytes = [&](std::uint64_t b) {
        return nlohmann::json{{"bytes", b}, {"mb_1e6", to_mb_decimal(b)}, {"mb_2p20", to_mb_binary(b)}};
    };
    j["logits"] = bytes(r.logit_bytes);
    j["codebooks"] = bytes(r.codebook_bytes);
    j["decoder"] = bytes(r.decoder_bytes);
    j["appearance"] = bytes(r.appearance_bytes);
    j["unique"] = bytes(r.unique_bytes);
    j["geometry"] = bytes(r.geometry_bytes);
    j["ratio"] = r.ratio;
    nlohmann::json quality = nlohmann::json::object();
    if (q.color_error) quality["mean_color_error"] = *q.color_error;
    if (q.psnr_db) quality["preview_psnr_db"] = std::isinf(*q.psnr_db) ? nlohmann::json("inf") : nlohmann::json(*q.psnr_db);
    if (q.position_error) quality["position_error"] = *q.position_error;
    if (q.curvature_error) quality["curvature_error"] = *q.curvature_error;
    j["quality"] = quality;
    return j;
}

}  // namespace cghair
