#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cghair/config.h"
#include "cghair/error.h"

namespace cghair {

// Raised by every stage; carries the stage name and the underlying code.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, ErrorCode code, const std::string& what)
        : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)), code_(code) {}
    const std::string& stage() const noexcept { return stage_; }
    ErrorCode code() const noexcept { return code_; }

private:
    std::string stage_;
    ErrorCode code_;
};

using Logger = std::function<void(const std::string&)>;

// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* kSynthHair = "synth.cgh";
inline constexpr const char* kSynthTargets = "synth_targets.bin";
inline constexpr const char* kHair = "hair.cgh";
inline constexpr const char* kTargets = "targets.bin";
inline constexpr const char* kClusters = "clusters.idx";
inline constexpr const char* kCards = "cards.bin";
inline constexpr const char* kCardsObj = "cards.obj";
inline constexpr const char* kStrandCard = "strand_card.idx";
inline constexpr const char* kUV = "uv.bin";
inline constexpr const char* kTextureDir = "textures";
inline constexpr const char* kCardClusters = "card_clusters.idx";
inline constexpr const char* kFitted = "fitted.cghf";
inline constexpr const char* kFitTrace = "fit_trace.csv";
inline constexpr const char* kModel = "model.cghm";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kConfigEcho = "config.ini";
inline constexpr const char* kRenderDir = "render";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportJson = "report.json";
}  // namespace artifact

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg, Logger log = {});

    const PipelineConfig& config() const { return cfg_; }
    std::filesystem::path out(const std::string& name) const;

    void synth();
    void ingest();
    void cluster();
    void cards();
    void uvmap();
    void codebook();
    void fit();
    void export_model();
    void render();
    void report();
    // synth (when no input is configured), then every stage in order.
    void run();

    static const std::vector<std::string>& stage_names();
    void run_stage(const std::string& name);

private:
    PipelineConfig cfg_;
    Logger log_;

    void note(const std::string& msg) const;
    template <class F>
    void guarded(const char* stage, F&& body);
};

}  // namespace cghair
