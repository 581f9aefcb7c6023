#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "cghair/codebook.h"

namespace cghair {

// Exported models go to 'CGHM' (float32, hard indices, no logits); fitted
// soft models go to 'CGHF' (float64, logits, no hard indices). Layout after
// the magic: u32 N_S, G, N_T, K, D, H, SH degree, card count; u32 strand->card;
// u32 card->cluster; [CGHM] u32 hard index per strand | [CGHF] logits K x N_S
// column-major; codebooks (N_T blocks of K x D row-major); w1 (H x D row-major),
// b1, w2 (G*C x H row-major), b2; opacities strand-major; tau.
std::vector<std::uint8_t> write_model(const CompactAppearanceModel& m);
CompactAppearanceModel parse_model(std::span<const std::uint8_t> bytes);

// Counts, section byte offsets and conventions of a serialized model.
nlohmann::json model_manifest(const CompactAppearanceModel& m);

}  // namespace cghair
