// kinflow command-line runner: configuration-driven experiment scenarios.
//
//   kinflow run <config.json> [--out DIR] [--seed U64] [--dry-run]
//   kinflow list
//
// Exit codes: 0 success, 2 validation failure, 3 numerical abort.
// KINFLOW_THREADS controls the worker count; results are independent of it.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "kinflow/scenarios.hpp"

int main(int argc, char** argv) {
    CLI::App app{"kinflow - numerical laboratory for stochastic kinetic transport"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed_override = 0;
    bool has_seed = false;
    bool dry_run = false;

    CLI::App* run_cmd = app.add_subcommand("run", "run a scenario from a JSON config");
    run_cmd->add_option("config", config_path, "path to the experiment config")->required();
    run_cmd->add_option("--out", out_dir, "output directory (overrides config)");
    run_cmd->add_option("--seed", seed_override, "seed override")
        ->each([&](const std::string&) { has_seed = true; });
    run_cmd->add_flag("--dry-run", dry_run, "validate and print the plan without computing");

    CLI::App* list_cmd = app.add_subcommand("list", "list available scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (list_cmd->parsed()) {
        std::cout << kinflow::list_scenarios();
        return 0;
    }

    try {
        kinflow::ExperimentConfig cfg = kinflow::load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (has_seed) cfg.seed = seed_override;
        if (dry_run) {
            std::cout << "scenario:    " << cfg.scenario << "\n"
                      << "seed:        " << cfg.seed << "\n"
                      << "output_dir:  " << cfg.output_dir << "\n"
                      << "dimension:   " << cfg.dimension << "\n"
                      << "domain:      L=" << cfg.domain.box_length << " nx=" << cfg.domain.nx
                      << " v_max=" << cfg.domain.v_max << " nv=" << cfg.domain.nv << "\n"
                      << "ensemble:    samples=" << cfg.ensemble.samples
                      << " modes=" << cfg.ensemble.modes << " steps=" << cfg.ensemble.steps
                      << " t=[" << cfg.ensemble.t0 << "," << cfg.ensemble.t1 << "]\n"
                      << "config_hash: " << cfg.config_hash() << "\n"
                      << "plan:        validated, not executed (--dry-run)\n";
            return 0;
        }
        kinflow::run_scenario(cfg);
        std::cout << "wrote artifacts to " << cfg.output_dir << "\n";
        return 0;
    } catch (const kinflow::ConfigError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    }
}
