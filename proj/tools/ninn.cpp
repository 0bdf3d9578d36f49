#include "ninn/cli/commands.hpp"
#include "ninn/cli/manifest.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Nudging-induced ResNet data assimilation pipeline"};
    app.set_version_flag("--version", ninn::cli::kToolVersion);
    app.require_subcommand(1);

    ninn::cli::CommandOptions options;
    std::uint64_t seed = 0;
    std::string chosen;
    const std::pair<const char*, const char*> commands[] = {
        {"gen-data", "Generate the training dataset, truth runs and observation streams"},
        {"train", "Train one ResNet per state component"},
        {"assimilate", "Run the configured assimilation methods over the mu/Lambda grid"},
        {"report", "Collect result cells into rmse_table.csv"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", options.config, "INI experiment file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", options.out, "Output directory")->required();
        sub->add_option("--seed", seed, "Master seed (overrides run.seed)");
        sub->add_option("--jobs", options.jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->callback([&chosen, name = std::string(name)] { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ninn::cli::kConfig;
    }
    for (auto* sub : app.get_subcommands())
        if (sub->count("--seed") > 0) options.seed = seed;
    return ninn::cli::run_command(chosen, options);
}
