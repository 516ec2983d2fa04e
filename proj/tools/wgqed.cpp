#include <iostream>

#include "CLI11.hpp"

#include "wgqed/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"waveguide QED simulations driven by JSON run configs"};
    app.set_version_flag("--version", WGQED_VERSION);
    app.require_subcommand(1);

    std::string config;
    std::optional<std::string> output;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("config", config, "path to the config file")->required();
    run->add_option("--output", output, "output path prefix (overrides the config)");
    run->add_option("--seed", seed, "random seed (overrides the config)");

    bool as_json = false;
    auto* list = app.add_subcommand("list", "list experiments and their parameters");
    list->add_flag("--json", as_json, "machine-readable listing");

    std::string to_check;
    auto* validate = app.add_subcommand("validate", "check a config against the schema without running it");
    validate->add_option("config", to_check, "path to the config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (*run) {
        wgqed::RunOptions opts;
        opts.output = output;
        opts.seed = seed;
        return wgqed::run_config_file(config, opts, std::cout, std::cerr);
    }
    if (*list) {
        std::cout << wgqed::list_experiments(as_json);
        return 0;
    }
    return wgqed::validate_config_file(to_check, std::cout, std::cerr);
}
