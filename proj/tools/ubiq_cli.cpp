// Command-line front end: binds economy/policy configuration files to the
// engine and emits reproducible tabular artifacts.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ubiq/cli.hpp"

namespace {

void add_common(CLI::App* cmd, ubiq::RunConfig& cfg, std::uint64_t& seed_slot, bool& seed_set) {
    cmd->add_option("--economy", cfg.economy_path, "economy config file")->required();
    cmd->add_option("--policy", cfg.policy_spec,
                    "policy, inline 'keep=..,ubi=..,delta=..' or a file with a policy line");
    cmd->add_option("--out", cfg.out_path, "output file (default: stdout)");
    cmd->add_option("--format", cfg.format, "output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", seed_slot, "RNG seed (required for stochastic commands)")
        ->each([&seed_set](const std::string&) { seed_set = true; });
    cmd->add_option("--paths", cfg.paths, "number of Monte Carlo paths");
    cmd->add_option("--steps", cfg.steps, "number of simulation time steps");
    cmd->add_option("--nt", cfg.nt, "solver time steps");
    cmd->add_option("--nx", cfg.nx, "solver spatial nodes (PDE regime)");
    cmd->add_option("--xmin", cfg.x_min, "left edge of the PDE state grid");
    cmd->add_option("--xmax", cfg.x_max, "right edge of the PDE state grid");
    cmd->add_option("--tol", cfg.tol, "verification tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--regime", cfg.regime, "solver regime: ode, pde, mc or auto")
        ->check(CLI::IsMember({"ode", "pde", "mc", "auto"}));
    cmd->add_option("--wmin", cfg.w_min, "sweep: smallest wage level");
    cmd->add_option("--wmax", cfg.w_max, "sweep: largest wage level");
    cmd->add_option("--wn", cfg.w_count, "sweep: number of wage grid points");
    cmd->add_option("--deltas", cfg.deltas, "sweep: list of influence parameters")
        ->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UBI financial equilibrium engine"};
    app.require_subcommand(1);
    app.footer("Thread count defaults to the hardware concurrency; override with UBIQ_THREADS.");

    ubiq::RunConfig cfg;
    std::uint64_t seed_slot = 0;
    bool seed_set = false;
    const std::vector<std::string> commands = {"labor-sweep", "market-sweep", "solve",
                                               "simulate",    "verify",       "welfare",
                                               "policy-compare"};
    for (const auto& name : commands) add_common(app.add_subcommand(name), cfg, seed_slot, seed_set);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }
    if (seed_set) cfg.seed = seed_slot;

    try {
        return ubiq::run_command(app.get_subcommands().front()->get_name(), cfg);
    } catch (const ubiq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ubiq::SeedRequired& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ubiq::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 3;
    } catch (const ubiq::VerificationFailure& e) {
        std::cerr << "verification failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
