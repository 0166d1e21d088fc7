#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "symflow/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Conserved quantities and orbit geometry for invariant nonsmooth objectives"};
    app.require_subcommand(1);

    std::string config_path;
    symflow::CliOverrides overrides;
    std::string output_dir;
    int jobs = 0;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "JSON run configuration")->required();
        cmd->add_option("--output-dir", output_dir, "Override the configured output directory");
        cmd->add_option("--jobs", jobs, "Parallel trials for scans");
        cmd->add_option("--seed", seed, "Override the configured root seed");
    };

    CLI::App* run = app.add_subcommand("run", "Integrate subgradient dynamics and log conservation");
    CLI::App* check = app.add_subcommand("check", "Run the configured numeric diagnostics");
    CLI::App* scan = app.add_subcommand("scan", "Monte Carlo escape statistics around a point");
    add_common(run);
    add_common(check);
    add_common(scan);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) {
            std::cerr << "error: " << e.what() << "\n";
            return 64;
        }
        return app.exit(e);  // --help and friends
    }

    if (!output_dir.empty()) overrides.output_dir = output_dir;
    if (run->count("--jobs") || check->count("--jobs") || scan->count("--jobs")) overrides.jobs = jobs;
    if (run->count("--seed") || check->count("--seed") || scan->count("--seed")) overrides.seed = seed;

    try {
        if (run->parsed()) return symflow::cmd_run(config_path, overrides);
        if (check->parsed()) return symflow::cmd_check(config_path, overrides);
        return symflow::cmd_scan(config_path, overrides);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 64;
    }
}
