#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alignet/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"alignet: sentiment-aligned network analysis pipeline"};
    app.set_version_flag("--version", std::string("alignet ") + alignet::kVersion);
    app.require_subcommand(1);

    struct StageArgs {
        std::string config;
        std::string out;
        std::uint64_t seed = 0;
        unsigned threads = 1;
        CLI::App* sub = nullptr;
    };
    std::vector<std::pair<std::string, StageArgs>> stages;
    for (const char* name : {"ingest", "score", "graph", "aggregate", "nulltest", "communities",
                             "intersect", "cluster", "report", "synth", "pipeline"})
        stages.push_back({name, {}});

    for (auto& [name, args] : stages) {
        std::string desc = name == std::string("pipeline") ? "run all stages in order"
                                                           : "run the " + name + " stage";
        args.sub = app.add_subcommand(name, desc);
        args.sub->add_option("--config", args.config, "pipeline configuration JSON")->required();
        args.sub->add_option("--seed", args.seed, "override the master seed");
        args.sub->add_option("--threads", args.threads, "parallelism cap (does not affect results)");
        args.sub->add_option("--out", args.out, "override the output directory");
    }

    CLI11_PARSE(app, argc, argv);

    for (auto& [name, args] : stages) {
        if (!args.sub->parsed()) continue;
        try {
            auto config = alignet::load_pipeline_config(args.config);
            std::optional<std::uint64_t> seed_override;
            if (args.sub->count("--seed")) seed_override = args.seed;
            auto ctx = alignet::make_context(config, seed_override, args.out, args.threads);
            if (name == "pipeline") {
                alignet::run_pipeline(config, ctx);
            } else {
                alignet::run_stage(alignet::stage_from_string(name), config, ctx);
            }
            std::cerr << "alignet: " << name << " done, outputs in " << ctx.out_dir << "\n";
            return 0;
        } catch (const alignet::MissingInputError& e) {
            std::cerr << "alignet: missing input file: " << e.path() << "\n";
            return 2;
        } catch (const alignet::ValidationError& e) {
            std::cerr << "alignet: validation error: " << e.what() << "\n";
            return 3;
        } catch (const alignet::ArgumentError& e) {
            std::cerr << "alignet: invalid argument: " << e.what() << "\n";
            return 3;
        } catch (const std::exception& e) {
            std::cerr << "alignet: error: " << e.what() << "\n";
            return 1;
        }
    }
    return 1;
}
