#include "stifflab/cli_io.hpp"
#include "stifflab/errors.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"stifflab: Brownian motion with a stiff interface at the origin"};
    app.require_subcommand(1);
    app.set_version_flag("--version", STIFFLAB_VERSION);

    stifflab::CliFlags flags;
    std::string solve_kind;
    std::string out_dir = "out";
    std::uint64_t seed = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", out_dir, "directory for CSV, SVG and manifest output");
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", flags.threads, "worker threads (default: STIFFLAB_THREADS or all cores)")
            ->check(CLI::NonNegativeNumber);
        sub->add_flag("--svg", flags.svg, "also write SVG plots");
    };

    auto* solve = app.add_subcommand("solve", "resolvent or heat solve on one scenario");
    solve->add_option("kind", solve_kind, "resolvent | heat")->required()->check(CLI::IsMember({"resolvent", "heat"}));
    common(solve);
    auto* sweep = app.add_subcommand("sweep", "eps-barrier sweep toward a limiting phase");
    common(sweep);
    auto* mc = app.add_subcommand("mc", "Monte Carlo paths (snob or ctmc engine)");
    common(mc);
    auto* check = app.add_subcommand("check", "identity and invariant battery");
    common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    flags.out_dir = out_dir;
    for (auto* sub : {solve, sweep, mc, check})
        if (sub->parsed() && sub->count("--seed"))
            flags.seed = seed;

    try {
        if (solve->parsed())
            return stifflab::cmd_solve(flags, solve_kind, std::cout);
        if (sweep->parsed())
            return stifflab::cmd_sweep(flags, std::cout);
        if (mc->parsed())
            return stifflab::cmd_mc(flags, std::cout);
        return stifflab::cmd_check(flags, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return stifflab::exit_code_for(e);
    }
}
