#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "cghair/image.h"
#include "cghair/types.h"

namespace cghair {

enum class LogitStorage { Float, Index };

// Every field must be set; missing ones raise IncompleteConfig.
struct AccountingConfig {
    std::optional<std::uint64_t> strands;      // N_S
    std::optional<std::uint64_t> gaussians;    // G
    std::optional<std::uint64_t> clusters;     // N_T
    std::optional<std::uint64_t> entries;      // K
    std::optional<std::uint64_t> feature_dim;  // D
    std::optional<std::uint64_t> hidden;       // H
    std::optional<std::uint64_t> sh_degree;
    std::optional<LogitStorage> logits;
};

struct SizeReport {
    std::uint64_t strands = 0, gaussians = 0, clusters = 0, entries = 0, feature_dim = 0, hidden = 0,
                  sh_degree = 0, coeffs = 0;
    LogitStorage logit_storage = LogitStorage::Float;

    // Geometry: per point (u, v) + delta, per Gaussian one opacity. The
    // triangle follows from (u, v), so it is not stored.
    std::uint64_t geometry_bytes = 0;
    std::uint64_t logit_bytes = 0;
    std::uint64_t codebook_bytes = 0;
    std::uint64_t decoder_bytes = 0;
    std::uint64_t appearance_bytes = 0;
    std::uint64_t unique_bytes = 0;
    double ratio = 0.0;  // unique / appearance
};

SizeReport parameter_accounting(const AccountingConfig& cfg);

inline double to_mb_decimal(std::uint64_t bytes) { return static_cast<double>(bytes) / 1e6; }
inline double to_mb_binary(std::uint64_t bytes) { return static_cast<double>(bytes) / 1048576.0; }

// Ratio from a pair of sizes printed in MB; the unit cancels.
double ratio_from_mb(double unique_mb, double model_mb);

// Sentinel for identical images.
double psnr(const Image& a, const Image& b, double max_value = 1.0);

double position_error(const Hairstyle& a, const Hairstyle& b);

// Turning angle over mean adjacent segment length, per interior point.
std::vector<double> discrete_curvature(const Polyline& p);
double curvature_error(const Hairstyle& a, const Hairstyle& b);

struct QualityReport {
    std::optional<double> color_error;
    std::optional<double> psnr_db;
    std::optional<double> position_error;
    std::optional<double> curvature_error;
};

std::string size_report_text(const SizeReport& r, const QualityReport& q = {});
nlohmann::json size_report_json(const SizeReport& r, const QualityReport& q = {});

}  // namespace cghair
