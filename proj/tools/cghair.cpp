#include <chrono>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cghair/config.h"
#include "cghair/pipeline.h"

int main(int argc, char** argv) {
    CLI::App app{"Compact Gaussian hair: strands to cards, codebooks and splat previews"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string output;
    std::string input;
    bool verbose = false;
    bool print_config = false;

    app.add_option("--config", config_path, "INI config file (defaults apply when omitted)");
    app.add_option("--seed", seed, "seed, overrides the config");
    app.add_option("--threads", threads, "worker count; outputs do not depend on it")->check(CLI::PositiveNumber);
    app.add_option("--output", output, "output directory, overrides paths.output");
    app.add_option("--input", input, "hair file, overrides paths.input");
    app.add_flag("--verbose,-v", verbose, "log stage progress to stderr");
    app.add_flag("--print-config", print_config, "print the effective config before running");

    const char* help[] = {
        "generate a synthetic wisp hairstyle and target colors",
        "load and resample the input hairstyle",
        "k-means the strands into guide clusters",
        "build one hair card per cluster",
        "map strands onto their cards and rasterize textures",
        "cluster card textures into shared codebook groups",
        "fit codebooks, logits, decoder and opacities",
        "export the hard-indexed compact model and manifest",
        "render compact and reference previews",
        "write size accounting and quality metrics",
        "every stage in order",
    };
    const auto& names = cghair::Pipeline::stage_names();
    for (std::size_t i = 0; i < names.size(); ++i) app.add_subcommand(names[i], help[i])->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        cghair::PipelineConfig cfg =
            config_path.empty() ? cghair::default_config() : cghair::load_config(config_path);
        if (seed) {
            cfg.seed = *seed;
            cfg.synth.seed = *seed;
            cfg.fit.seed = *seed;
        }
        if (threads) {
            cfg.threads = *threads;
            cfg.fit.threads = *threads;
        }
        if (!output.empty()) cfg.output = output;
        if (!input.empty()) cfg.input = input;
        if (print_config) std::cout << cghair::config_to_ini(cfg);

        cghair::Logger log;
        if (verbose) {
            const auto t0 = std::chrono::steady_clock::now();
            log = [t0](const std::string& m) {
                const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
                std::cerr << "[" << std::fixed << std::setprecision(1) << dt.count() << "s] " << m << std::endl;
            };
        }
        cghair::Pipeline pipeline(cfg, log);
        pipeline.run_stage(app.get_subcommands().front()->get_name());
    } catch (const cghair::StageError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
