#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "cghair/card.h"
#include "cghair/codebook.h"
#include "cghair/gsplat.h"
#include "cghair/synth.h"

namespace cghair {

struct PipelineConfig {
    // [paths] input: a hair file to ingest; empty means the synth output.
    std::string input;
    std::string output = "cghair_out";

    // [general]
    std::uint64_t seed = 1;
    int threads = 1;

    // [synth]
    WispParams synth;
    std::vector<Vec3> palette = {Vec3(0.85, 0.15, 0.10), Vec3(0.15, 0.55, 0.85), Vec3(0.95, 0.80, 0.25),
                                 Vec3(0.25, 0.20, 0.15)};
    std::size_t color_segments = 1;

    // [ingest] canonical points per strand after resampling
    std::size_t points_per_strand = 100;

    // [cluster] 400 for synthetic hair; use 800 for real captures.
    std::size_t n_c = 400;
    std::size_t kmeans_iters = 100;

    // [cards]
    CardConfig cards;

    // [uvmap]
    std::size_t uv_iters = 500;
    double uv_step = 1.0;
    std::size_t texture_width = 256;
    std::size_t texture_height = 256;

    // [codebook]
    std::size_t n_t = 64;
    std::size_t k = 10;
    std::size_t d = 64;
    std::size_t hidden = 256;
    std::size_t sh_degree = 1;
    std::size_t feature_grid = 32;
    double initial_opacity = 0.9;

    // [fit]
    FitHyper fit;

    // [render]
    double gaussian_radius = kDefaultGaussianRadius;
    bool opaque = false;
    Vec3 background = Vec3::Zero();
    std::vector<Camera> cameras;

    void validate() const;
};

PipelineConfig default_config();

// INI text: one section per stage, key = value. Vectors are written as
// space-separated numbers; the palette as ';'-separated triples. Cameras
// live in [camera0], [camera1], ... and are counted by render.cameras.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::string& path);
std::string config_to_ini(const PipelineConfig& cfg);
nlohmann::json config_to_json(const PipelineConfig& cfg);

}  // namespace cghair
