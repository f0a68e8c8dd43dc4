#include "tempus/cli/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace tempus::cli;
    CLI::App app{"Linear dynamic systems on time scales: solve, check, transform, oscillator"};
    app.set_version_flag("--version", tempus::kVersion);
    app.require_subcommand(1);

    CommandOptions opts;
    std::string config, batch, out;
    const auto add_verb = [&](const std::string& name, std::optional<RunKind> kind, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        auto* c = sub->add_option("--config", config, "scenario config file");
        auto* b = sub->add_option("--batch", batch, "directory of scenario configs");
        c->excludes(b);
        sub->add_option("--out", out, "output directory (one subdirectory per scenario)");
        sub->callback([&opts, kind] { opts.verb = kind; });
    };
    add_verb("solve", RunKind::Solve, "integrate the system and estimate its limit");
    add_verb("check", RunKind::Check, "classify the iterated tail integrals");
    add_verb("transform", RunKind::Transform, "apply the tail change of variables");
    add_verb("oscillator", RunKind::Oscillator, "reduce and integrate a discrete oscillator");
    add_verb("run", std::nullopt, "use the run kind written in each config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (!config.empty()) opts.config = config;
    if (!batch.empty()) opts.batch = batch;
    if (!out.empty()) opts.out = out;
    return run_command(opts, std::cout, std::cerr);
}
