#include "gmsde/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Simulate SDEs with a drift that jumps across a hypersurface"};
    app.require_subcommand(1, 1);

    gmsde::cli::Request req;
    int levels = 0;
    std::int64_t paths = 0;
    std::int64_t seed = 0;
    std::string methods;

    for (const char* name : {"convergence", "simulate", "check"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--example", req.example, "Example name (unit-circle, 1d-jump, dividend, ...)");
        sub->add_option("--config", req.config_path, "key=value configuration file");
        sub->add_option("--levels", levels, "Finest level k (step T 2^-k)");
        sub->add_option("--paths", paths, "Number of Monte Carlo paths");
        sub->add_option("--seed", seed, "Seed of the Brownian increments");
        sub->add_option("--methods", methods, "Comma-separated subset of gm,em");
        sub->add_option("--out", req.out, "Output file (default: standard output)");
        sub->add_option("--set", req.overrides, "Override one configuration key, key=value")->take_all();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : gmsde::cli::Exit::usage_or_config;
    }

    auto* sub = app.get_subcommands().front();
    req.command = sub->get_name();
    if (sub->count("--levels")) req.levels = levels;
    if (sub->count("--paths")) req.paths = paths;
    if (sub->count("--seed")) req.seed = seed;
    if (sub->count("--methods")) req.methods = methods;
    if (req.example.empty() && req.config_path.empty()) {
        std::cerr << "error: no example given\n" << sub->help();
        return gmsde::cli::Exit::usage_or_config;
    }
    return gmsde::cli::run(req, std::cout, std::cerr);
}
